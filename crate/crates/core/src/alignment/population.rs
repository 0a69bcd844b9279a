//! Seeded synthetic hand populations standing in for a capture dataset.

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::hand_model::{HandParams, NUM_ARTICULATED};
use crate::rotation::{log_rotation, rodrigues};

/// Per-axis articulation range in radians: `[min, max]` for flexion (x),
/// twist (y) and spread (z).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointRange {
    pub flex: [f64; 2],
    pub twist: [f64; 2],
    pub spread: [f64; 2],
}

impl JointRange {
    pub const fn finger() -> Self {
        Self {
            flex: [-0.15, 1.2],
            twist: [-0.08, 0.08],
            spread: [-0.2, 0.2],
        }
    }

    pub const fn thumb() -> Self {
        Self {
            flex: [-0.2, 0.8],
            twist: [-0.15, 0.15],
            spread: [-0.3, 0.3],
        }
    }

    /// The same range shrunk by `factor` about its midpoint.
    pub fn scaled(&self, factor: f64) -> Self {
        let s = |r: [f64; 2]| {
            let mid = 0.5 * (r[0] + r[1]);
            let half = 0.5 * (r[1] - r[0]) * factor;
            [mid - half, mid + half]
        };
        Self {
            flex: s(self.flex),
            twist: s(self.twist),
            spread: s(self.spread),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationConfig {
    pub size: usize,
    pub seed: u64,
    /// Wrist depth range, mm.
    pub depth_min: f64,
    pub depth_max: f64,
    /// Keep the wrist this many pixels inside the image.
    pub margin_px: f64,
    /// Axis-angle of the mean hand orientation in the camera frame.
    pub base_rotation: [f64; 3],
    /// Uniform jitter (rad) per axis-angle component around the base.
    pub rotation_jitter: f64,
    pub thumb_range: JointRange,
    pub finger_range: JointRange,
    /// Number of articulation clusters. Hands in one cluster share a base
    /// articulation, the way frames of one capture sequence do. Zero draws
    /// every hand independently.
    pub takes: usize,
    /// Uniform per-component articulation noise (rad) within a cluster.
    pub take_jitter: f64,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        Self {
            size: 500,
            seed: 7,
            depth_min: 250.0,
            depth_max: 600.0,
            margin_px: 20.0,
            // Fingers toward the top of the image, palm toward the camera.
            base_rotation: [std::f64::consts::PI, 0.0, 0.0],
            rotation_jitter: 0.4,
            thumb_range: JointRange::thumb(),
            finger_range: JointRange::finger(),
            takes: 4,
            take_jitter: 0.05,
        }
    }
}

impl PopulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::Parameter("population size must be positive".into()));
        }
        if !(self.depth_min > 0.0 && self.depth_min <= self.depth_max) {
            return Err(Error::Parameter(format!(
                "depth range [{}, {}] must be positive and ordered",
                self.depth_min, self.depth_max
            )));
        }
        if !(self.margin_px >= 0.0) || !(self.rotation_jitter >= 0.0) || !(self.take_jitter >= 0.0) {
            return Err(Error::Parameter("margin and jitter must be non-negative".into()));
        }
        Ok(())
    }
}

fn uniform(rng: &mut impl Rng, r: [f64; 2]) -> f64 {
    if r[1] > r[0] {
        rng.gen_range(r[0]..r[1])
    } else {
        r[0]
    }
}

/// Articulation drawn uniformly within the configured ranges.
pub fn sample_articulation(rng: &mut impl Rng, cfg: &PopulationConfig) -> [Vector3<f64>; NUM_ARTICULATED] {
    std::array::from_fn(|k| {
        let range = if k < 3 { &cfg.thumb_range } else { &cfg.finger_range };
        Vector3::new(
            uniform(rng, range.flex),
            uniform(rng, range.twist),
            uniform(rng, range.spread),
        )
    })
}

fn jittered(
    rng: &mut impl Rng,
    base: &[Vector3<f64>; NUM_ARTICULATED],
    cfg: &PopulationConfig,
) -> [Vector3<f64>; NUM_ARTICULATED] {
    let j = cfg.take_jitter;
    std::array::from_fn(|k| {
        let range = if k < 3 { &cfg.thumb_range } else { &cfg.finger_range };
        let lim = [range.flex, range.twist, range.spread];
        Vector3::from_fn(|c, _| (base[k][c] + uniform(rng, [-j, j])).clamp(lim[c][0], lim[c][1]))
    })
}

/// Draws one hand with the given articulation: orientation jittered about
/// the base, wrist uniform over the visible frustum.
pub fn sample_hand(
    rng: &mut impl Rng,
    cam: &CameraIntrinsics,
    shape_rank: usize,
    theta: [Vector3<f64>; NUM_ARTICULATED],
    cfg: &PopulationConfig,
) -> HandParams {
    let mut p = HandParams::zeros(shape_rank);
    p.theta = theta;
    let j = cfg.rotation_jitter;
    let jitter = Vector3::new(uniform(rng, [-j, j]), uniform(rng, [-j, j]), uniform(rng, [-j, j]));
    p.root_rot = log_rotation(&(rodrigues(&jitter) * rodrigues(&Vector3::from(cfg.base_rotation))));
    let z = uniform(rng, [cfg.depth_min, cfg.depth_max]);
    let m = cfg.margin_px.min(0.5 * cam.width().min(cam.height()) as f64);
    let uv = Vector2::new(
        uniform(rng, [m, cam.width() as f64 - m]),
        uniform(rng, [m, cam.height() as f64 - m]),
    );
    p.root_trans = cam.back_project(&uv, z);
    p
}

/// Seeded population. Hand 0 is centred in the image at mid depth and
/// serves as the default scan reference.
pub fn synthetic_population(
    cam: &CameraIntrinsics,
    shape_rank: usize,
    cfg: &PopulationConfig,
) -> Result<Vec<HandParams>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bases: Vec<_> = (0..cfg.takes).map(|_| sample_articulation(&mut rng, cfg)).collect();
    Ok((0..cfg.size)
        .map(|i| {
            let theta = if bases.is_empty() {
                sample_articulation(&mut rng, cfg)
            } else {
                jittered(&mut rng, &bases[i % bases.len()], cfg)
            };
            let mut hand = sample_hand(&mut rng, cam, shape_rank, theta, cfg);
            if i == 0 {
                // The scan reference: wrist on the optical axis at mid depth,
                // so shifted placements can reach every part of the image.
                let z = 0.5 * (cfg.depth_min + cfg.depth_max);
                hand.root_trans = cam.back_project(&cam.principal_point(), z);
            }
            hand
        })
        .collect())
}
