use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pnp::{pnp_align, pnp_align_with_shift};
use crate::camera::{project, CameraIntrinsics};
use crate::error::{Error, Result};
use crate::hand_model::{HandParams, KeypointSet2D, KeypointSet3D, SkinnedHandModel};
use crate::metrics::{
    absolute_3d_error, centered_2d_error, crop_pixel_distance, mpjpe, root_relative_3d_error, AmbiguityRecord,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    /// Distances between hands as posed.
    Raw,
    /// Each hand is first PnP-aligned to the reference 2D keypoints.
    Pnp,
    /// As `Pnp`, against the reference keypoints moved by a random shift.
    PnpShift,
}

impl ScanMode {
    pub const ALL: [ScanMode; 3] = [ScanMode::Raw, ScanMode::Pnp, ScanMode::PnpShift];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScanMode::Raw => "raw",
            ScanMode::Pnp => "pnp",
            ScanMode::PnpShift => "pnp_shift",
        }
    }
}

impl std::str::FromStr for ScanMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(ScanMode::Raw),
            "pnp" => Ok(ScanMode::Pnp),
            "pnp_shift" => Ok(ScanMode::PnpShift),
            other => Err(Error::Parameter(format!("unknown scan mode '{other}'"))),
        }
    }
}

/// How two hands are brought into a common root before comparing their
/// 3D shape.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootAlignment {
    /// Subtract the wrist; camera-frame orientation is kept, so a rigid
    /// rotation found by alignment shows up as 3D error.
    #[default]
    Location,
    /// Express both hands in their keypoint root frames. Rigid alignment
    /// cannot change this error; only articulation differences remain.
    Frame,
}

impl RootAlignment {
    pub fn as_str(&self) -> &'static str {
        match self {
            RootAlignment::Location => "location",
            RootAlignment::Frame => "frame",
        }
    }
}

impl std::str::FromStr for RootAlignment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "location" => Ok(RootAlignment::Location),
            "frame" => Ok(RootAlignment::Frame),
            other => Err(Error::Parameter(format!("unknown root alignment '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub mode: ScanMode,
    /// Seed for the per-hand shift draws.
    pub seed: u64,
    /// Shifted keypoints stay at least this far inside the image (px).
    pub shift_border: f64,
    pub root_alignment: RootAlignment,
}

impl ScanConfig {
    pub fn new(mode: ScanMode) -> Self {
        Self {
            mode,
            seed: 0,
            shift_border: 10.0,
            root_alignment: RootAlignment::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanFailure {
    pub pair_id: usize,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScanOutput {
    pub records: Vec<AmbiguityRecord>,
    pub failures: Vec<ScanFailure>,
}

/// Shift drawn uniformly among those keeping every keypoint at least
/// `border` px inside the image. The stream is keyed by `pair_id`, so draws
/// do not depend on evaluation order.
pub fn sample_shift(
    ref2d: &KeypointSet2D,
    cam: &CameraIntrinsics,
    border: f64,
    seed: u64,
    pair_id: usize,
) -> Result<Vector2<f64>> {
    let (lo, hi) = ref2d.bounds();
    let x_range = [border - lo.x, cam.width() as f64 - border - hi.x];
    let y_range = [border - lo.y, cam.height() as f64 - border - hi.y];
    if x_range[0] > x_range[1] || y_range[0] > y_range[1] {
        return Err(Error::Parameter(format!(
            "reference keypoints do not fit inside a {border} px border"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(pair_id as u64);
    let mut draw = |r: [f64; 2]| if r[1] > r[0] { rng.gen_range(r[0]..r[1]) } else { r[0] };
    let sx = draw(x_range);
    let sy = draw(y_range);
    Ok(Vector2::new(sx, sy))
}

/// Distances between the reference and one (possibly aligned) hand.
pub fn ambiguity_record(
    pair_id: usize,
    reference3d: &KeypointSet3D,
    reference2d: &KeypointSet2D,
    hand3d: &KeypointSet3D,
    cam: &CameraIntrinsics,
    root_alignment: RootAlignment,
) -> Result<AmbiguityRecord> {
    let hand2d = project(cam, hand3d)?;
    let rootrel_3d_err = match root_alignment {
        RootAlignment::Location => mpjpe(hand3d, reference3d),
        RootAlignment::Frame => root_relative_3d_error(reference3d, None, hand3d, None)?,
    };
    Ok(AmbiguityRecord {
        pair_id,
        crop_px_dist: crop_pixel_distance(reference2d, &hand2d),
        centered_2d_err: centered_2d_error(reference2d, &hand2d),
        abs_3d_err: absolute_3d_error(reference3d, hand3d),
        rootrel_3d_err,
    })
}

/// Compares every population hand against the reference. Per-hand failures
/// are collected and the scan continues; records keep population order.
pub fn ambiguity_scan(
    reference: &HandParams,
    population: &[HandParams],
    model: &SkinnedHandModel,
    cam: &CameraIntrinsics,
    config: &ScanConfig,
) -> Result<ScanOutput> {
    if population.is_empty() {
        return Err(Error::Parameter("ambiguity scan needs a non-empty population".into()));
    }
    let ref3d = model.forward_kinematics(reference)?.joints;
    let ref2d = project(cam, &ref3d)?;

    let results: Vec<Result<AmbiguityRecord>> = population
        .par_iter()
        .enumerate()
        .map(|(pair_id, params)| {
            let hand3d = model.forward_kinematics(params)?.joints;
            let aligned = match config.mode {
                ScanMode::Raw => hand3d,
                ScanMode::Pnp => pnp_align(&ref2d, &hand3d, cam)?.pose.apply(&hand3d),
                ScanMode::PnpShift => {
                    let shift = sample_shift(&ref2d, cam, config.shift_border, config.seed, pair_id)?;
                    pnp_align_with_shift(&ref2d, &hand3d, cam, shift)?.pose.apply(&hand3d)
                }
            };
            ambiguity_record(pair_id, &ref3d, &ref2d, &aligned, cam, config.root_alignment)
        })
        .collect();

    let mut out = ScanOutput::default();
    for (pair_id, r) in results.into_iter().enumerate() {
        match r {
            Ok(rec) => out.records.push(rec),
            Err(e) => out.failures.push(ScanFailure {
                pair_id,
                error: e.to_string(),
            }),
        }
    }
    Ok(out)
}

/// Near/far comparison of the scatter: the largest root-relative 3D error
/// among records whose centered 2D error is below `max_centered_2d`, split
/// by crop distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationSummary {
    pub near_count: usize,
    pub far_count: usize,
    /// Zero when the bucket is empty.
    pub near_max_rootrel: f64,
    pub far_max_rootrel: f64,
}

impl SeparationSummary {
    /// `far / near`; infinite when only the far bucket has error.
    pub fn ratio(&self) -> f64 {
        if self.near_max_rootrel > 0.0 {
            self.far_max_rootrel / self.near_max_rootrel
        } else if self.far_max_rootrel > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

pub fn separation(records: &[AmbiguityRecord], max_centered_2d: f64, near_px: f64, far_px: f64) -> SeparationSummary {
    let mut s = SeparationSummary {
        near_count: 0,
        far_count: 0,
        near_max_rootrel: 0.0,
        far_max_rootrel: 0.0,
    };
    for r in records.iter().filter(|r| r.centered_2d_err < max_centered_2d) {
        if r.crop_px_dist < near_px {
            s.near_count += 1;
            s.near_max_rootrel = s.near_max_rootrel.max(r.rootrel_3d_err);
        } else if r.crop_px_dist > far_px {
            s.far_count += 1;
            s.far_max_rootrel = s.far_max_rootrel.max(r.rootrel_3d_err);
        }
    }
    s
}
