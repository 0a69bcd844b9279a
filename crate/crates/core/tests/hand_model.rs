mod common;

use std::f64::consts::FRAC_PI_2;

use handcrop::hand_model::{HandParams, ModelFile, SkinnedHandModel, NUM_JOINTS};
use nalgebra::{Matrix4, Rotation3, Translation3, Vector3};
use proptest::prelude::*;

/// Straightforward recursive evaluator over 4x4 homogeneous transforms,
/// working from the dense on-disk model layout.
struct Oracle {
    file: ModelFile,
    parents: Vec<Option<usize>>,
    articulated: Vec<usize>,
}

impl Oracle {
    fn new(model: &SkinnedHandModel) -> Self {
        let file = model.to_file();
        let parents = file
            .joint_parents
            .iter()
            .map(|&p| (p >= 0).then_some(p as usize))
            .collect();
        Self {
            file,
            parents,
            articulated: model.articulated_joints().to_vec(),
        }
    }

    fn shaped(&self, beta: &[f64]) -> (Vec<Vector3<f64>>, Vec<Vector3<f64>>) {
        let verts: Vec<Vector3<f64>> = self
            .file
            .template_vertices
            .iter()
            .zip(&self.file.shape_basis)
            .map(|(t, basis)| {
                let mut v = Vector3::from(*t);
                for (axis, row) in basis.iter().enumerate() {
                    for (b, d) in row.iter().enumerate() {
                        v[axis] += beta[b] * d;
                    }
                }
                v
            })
            .collect();
        let joints = self
            .file
            .joint_regressor
            .iter()
            .map(|row| row.iter().zip(&verts).map(|(w, v)| v * *w).sum())
            .collect();
        (verts, joints)
    }

    fn local_rotation(&self, p: &HandParams, j: usize) -> Matrix4<f64> {
        match self.articulated.iter().position(|&a| a == j) {
            Some(k) => Rotation3::from_scaled_axis(p.theta[k]).to_homogeneous(),
            None => Matrix4::identity(),
        }
    }

    fn global(&self, p: &HandParams, rest: &[Vector3<f64>], j: usize) -> Matrix4<f64> {
        match self.parents[j] {
            None => {
                Translation3::from(p.root_trans).to_homogeneous()
                    * Rotation3::from_scaled_axis(p.root_rot).to_homogeneous()
                    * Translation3::from(rest[j]).to_homogeneous()
            }
            Some(parent) => {
                self.global(p, rest, parent)
                    * Translation3::from(rest[j] - rest[parent]).to_homogeneous()
                    * self.local_rotation(p, j)
            }
        }
    }

    fn pose(&self, p: &HandParams) -> (Vec<Vector3<f64>>, Vec<Vector3<f64>>) {
        let (verts, rest) = self.shaped(&p.beta);
        let globals: Vec<Matrix4<f64>> = (0..NUM_JOINTS).map(|j| self.global(p, &rest, j)).collect();
        let joints = globals
            .iter()
            .map(|g| g.fixed_view::<3, 1>(0, 3).into_owned())
            .collect();
        let skinned = verts
            .iter()
            .zip(&self.file.skinning_weights)
            .map(|(v, w)| {
                let mut out = Vector3::zeros();
                for j in 0..NUM_JOINTS {
                    let m = globals[j] * Translation3::from(-rest[j]).to_homogeneous();
                    out += w[j] * m.transform_point(&(*v).into()).coords;
                }
                out
            })
            .collect();
        (joints, skinned)
    }
}

fn max_dist(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max)
}

#[test]
fn fk_matches_transform_chain_oracle() {
    let model = common::model();
    let oracle = Oracle::new(&model);
    let mut rng = common::rng(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p = common::random_params(&mut rng, model.shape_rank());
        let posed = model.forward_kinematics(&p).unwrap();
        let (joints, verts) = oracle.pose(&p);
        worst = worst.max(max_dist(posed.joints.joints(), &joints));
        worst = worst.max(max_dist(&posed.vertices, &verts));
    }
    assert!(worst < 1e-9, "worst deviation {worst:e} mm");
}

#[test]
fn identity_pose_reproduces_rest_geometry() {
    let model = common::model();
    let mut rng = common::rng(2);
    let mut p = common::random_params(&mut rng, model.shape_rank());
    p.theta = [Vector3::zeros(); 15];
    p.root_rot = Vector3::zeros();
    p.root_trans = Vector3::zeros();
    let shaped = model.shape_hand(&p.beta).unwrap();
    let posed = model.forward_kinematics(&p).unwrap();
    assert!(max_dist(posed.joints.joints(), &shaped.joints) < 1e-12);
    assert!(max_dist(&posed.vertices, &shaped.vertices) < 1e-12);

    p.root_trans = Vector3::new(10.0, -20.0, 300.0);
    let moved = model.forward_kinematics(&p).unwrap();
    assert!((moved.joints.root() - p.root_trans).norm() < 1e-12);
}

#[test]
fn index_mcp_flexion_rotates_descendants() {
    let model = common::model();
    let oracle = Oracle::new(&model);
    let rest = *model.rest_joints();
    let mcp = 5;
    let k = model.articulated_joints().iter().position(|&j| j == mcp).unwrap();
    let mut p = HandParams::zeros(model.shape_rank());
    p.theta[k] = Vector3::new(FRAC_PI_2, 0.0, 0.0);
    let posed = model.forward_kinematics(&p).unwrap();
    let rot = Rotation3::from_scaled_axis(Vector3::new(FRAC_PI_2, 0.0, 0.0));
    for j in 0..NUM_JOINTS {
        let expected = if (6..=8).contains(&j) {
            rest[mcp] + rot * (rest[j] - rest[mcp])
        } else {
            rest[j]
        };
        let got = posed.joints.joints()[j];
        assert!((got - expected).norm() < 1e-9, "joint {j}: {got:?} vs {expected:?}");
    }
    let (joints, _) = oracle.pose(&p);
    assert!(max_dist(posed.joints.joints(), &joints) < 1e-9);
}

#[test]
fn rigidly_weighted_vertices_follow_their_joint() {
    let model = common::model();
    let mut rng = common::rng(3);
    let p = common::random_params(&mut rng, model.shape_rank());
    let shaped = model.shape_hand(&p.beta).unwrap();
    let posed = model.forward_kinematics(&p).unwrap();
    let mut checked = 0;
    for (v, w) in model.skinning_weights().iter().enumerate() {
        let Some(j) = w.iter().position(|&x| x == 1.0) else {
            continue;
        };
        let expected = posed.joint_rotations[j] * (shaped.vertices[v] - shaped.joints[j]) + posed.joints.joints()[j];
        assert!((posed.vertices[v] - expected).norm() < 1e-9);
        checked += 1;
    }
    assert!(checked > 0, "model has no rigidly weighted vertex");
}

#[test]
fn shape_blending_matches_basis_entrywise() {
    let model = common::model();
    let zero = model.shape_hand(&vec![0.0; model.shape_rank()]).unwrap();
    assert_eq!(zero.vertices, model.template_vertices());
    let mut e1 = vec![0.0; model.shape_rank()];
    e1[0] = 1.0;
    let one = model.shape_hand(&e1).unwrap();
    for ((v, t), d) in one
        .vertices
        .iter()
        .zip(model.template_vertices())
        .zip(&model.shape_basis()[0])
    {
        assert!((v - (t + d)).norm() < 1e-12);
    }
    assert!(model.shape_hand(&[0.0; 3]).is_err());
}

#[test]
fn skinning_weights_are_stochastic() {
    let model = common::model();
    for w in model.skinning_weights() {
        assert!(w.iter().all(|&x| x >= 0.0));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    assert!(model.is_watertight());
}

#[test]
fn model_file_round_trip() {
    let model = common::model();
    let json = model.to_json().unwrap();
    let back = SkinnedHandModel::from_json(&json).unwrap();
    let p = common::random_params(&mut common::rng(4), model.shape_rank());
    let a = model.forward_kinematics(&p).unwrap();
    let b = back.forward_kinematics(&p).unwrap();
    assert!(max_dist(a.joints.joints(), b.joints.joints()) < 1e-9);
}

fn arb_params() -> impl Strategy<Value = HandParams> {
    any::<u64>().prop_map(|seed| common::random_params(&mut common::rng(seed), 10))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn rigid_equivariance(p in arb_params(), seed in any::<u64>()) {
        let model = common::model();
        let mut rng = common::rng(seed);
        let r = common::random_rotation(&mut rng);
        let t = common::vec3(&mut rng, 200.0);
        let base = model.forward_kinematics(&p).unwrap();
        let moved = model.forward_kinematics(&p.rigidly_moved(&r, &t)).unwrap();
        for (a, b) in base.joints.joints().iter().zip(moved.joints.joints()) {
            let expected = r * a + t;
            prop_assert!((b - expected).norm() <= 1e-9 * expected.norm().max(1.0));
        }
        for (a, b) in base.vertices.iter().zip(&moved.vertices) {
            let expected = r * a + t;
            prop_assert!((b - expected).norm() <= 1e-9 * expected.norm().max(1.0));
        }
    }

    #[test]
    fn shape_superposition(s1 in any::<u64>(), s2 in any::<u64>(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let model = common::model();
        let rank = model.shape_rank();
        let beta1 = common::random_params(&mut common::rng(s1), rank).beta;
        let beta2 = common::random_params(&mut common::rng(s2), rank).beta;
        let mix: Vec<f64> = beta1.iter().zip(&beta2).map(|(x, y)| a * x + b * y).collect();
        let t = model.template_vertices();
        let h1 = model.shape_hand(&beta1).unwrap();
        let h2 = model.shape_hand(&beta2).unwrap();
        let hm = model.shape_hand(&mix).unwrap();
        for (((t, v1), v2), vm) in t.iter().zip(&h1.vertices).zip(&h2.vertices).zip(&hm.vertices) {
            let expected = t + a * (v1 - t) + b * (v2 - t);
            prop_assert!((vm - expected).norm() < 1e-9);
        }
        for j in 0..NUM_JOINTS {
            let r = model.rest_joints()[j];
            let expected = r + a * (h1.joints[j] - r) + b * (h2.joints[j] - r);
            prop_assert!((hm.joints[j] - expected).norm() < 1e-9);
        }
    }
}
