#![allow(dead_code)]

use std::f64::consts::PI;

use handcrop::camera::CameraIntrinsics;
use handcrop::hand_model::{build_procedural_hand, HandParams, HandSpec, SkinnedHandModel, NUM_ARTICULATED};
use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn model() -> SkinnedHandModel {
    build_procedural_hand(&HandSpec::default()).unwrap()
}

pub fn camera(width: u32, height: u32) -> CameraIntrinsics {
    CameraIntrinsics::from_horizontal_fov(width, height, 60.0).unwrap()
}

pub fn vec3(rng: &mut impl Rng, half: f64) -> Vector3<f64> {
    Vector3::new(
        rng.gen_range(-half..half),
        rng.gen_range(-half..half),
        rng.gen_range(-half..half),
    )
}

pub fn random_rotation(rng: &mut impl Rng) -> Matrix3<f64> {
    let axis = vec3(rng, 1.0);
    let angle = rng.gen_range(-PI..PI);
    Rotation3::from_scaled_axis(axis.normalize() * angle).into_inner()
}

/// Arbitrary parameters, not restricted to anatomical ranges.
pub fn random_params(rng: &mut impl Rng, shape_rank: usize) -> HandParams {
    HandParams {
        beta: (0..shape_rank).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        theta: std::array::from_fn::<_, NUM_ARTICULATED, _>(|_| vec3(rng, 1.0)),
        root_rot: vec3(rng, 2.0),
        root_trans: vec3(rng, 300.0),
    }
}

/// Palm toward the camera, fingers up in the image, wrist at `wrist`.
pub fn facing_pose(shape_rank: usize, wrist: Vector3<f64>) -> HandParams {
    HandParams::zeros(shape_rank).with_root(Vector3::new(PI, 0.0, 0.0), wrist)
}
