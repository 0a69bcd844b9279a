//! Distances between pairs of hands used to expose crop ambiguity, and the
//! standard evaluation metrics (MPJPE, MRRPE, 2D reprojection error).
//!
//! All per-joint averages pair joint `i` of one set with joint `i` of the
//! other.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::camera::{project, CameraIntrinsics};
use crate::error::{Error, Result};
use crate::hand_model::{KeypointSet2D, KeypointSet3D, INDEX_MCP, NUM_JOINTS, PINKY_MCP, WRIST};

/// One point of the ambiguity scatter: four distances between a reference
/// hand and another hand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguityRecord {
    pub pair_id: usize,
    /// px
    pub crop_px_dist: f64,
    /// px
    pub centered_2d_err: f64,
    /// mm
    pub abs_3d_err: f64,
    /// mm
    pub rootrel_3d_err: f64,
}

impl AmbiguityRecord {
    pub const CSV_HEADER: &'static str = "pair_id,crop_px_dist,centered_2d_err,abs_3d_err,rootrel_3d_err";

    pub fn zero(pair_id: usize) -> Self {
        Self {
            pair_id,
            crop_px_dist: 0.0,
            centered_2d_err: 0.0,
            abs_3d_err: 0.0,
            rootrel_3d_err: 0.0,
        }
    }

    pub fn is_valid(&self) -> bool {
        [
            self.crop_px_dist,
            self.centered_2d_err,
            self.abs_3d_err,
            self.rootrel_3d_err,
        ]
        .iter()
        .all(|v| v.is_finite() && *v >= 0.0)
    }

    /// Fixed-precision CSV row, stable across platforms.
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{:.9},{:.9},{:.9},{:.9}",
            self.pair_id, self.crop_px_dist, self.centered_2d_err, self.abs_3d_err, self.rootrel_3d_err
        )
    }
}

/// Writes the header plus one row per record.
pub fn records_to_csv(records: &[AmbiguityRecord]) -> String {
    let mut s = String::with_capacity(64 * (records.len() + 1));
    s.push_str(AmbiguityRecord::CSV_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&r.to_csv_row());
        s.push('\n');
    }
    s
}

fn mean_pairwise<T>(a: &[T; NUM_JOINTS], b: &[T; NUM_JOINTS], dist: impl Fn(&T, &T) -> f64) -> f64 {
    a.iter().zip(b).map(|(p, q)| dist(p, q)).sum::<f64>() / NUM_JOINTS as f64
}

/// Distance between the keypoint centroids of two hands (px).
pub fn crop_pixel_distance(a: &KeypointSet2D, b: &KeypointSet2D) -> f64 {
    (a.centroid() - b.centroid()).norm()
}

/// Mean per-joint pixel distance after moving both centroids to the origin.
pub fn centered_2d_error(a: &KeypointSet2D, b: &KeypointSet2D) -> f64 {
    let (ca, cb) = (a.centroid(), b.centroid());
    mean_pairwise(a.points(), b.points(), |p, q| ((p - ca) - (q - cb)).norm())
}

/// Mean per-joint distance with no alignment (mm).
pub fn absolute_3d_error(a: &KeypointSet3D, b: &KeypointSet3D) -> f64 {
    mean_pairwise(a.joints(), b.joints(), |p, q| (p - q).norm())
}

/// Mean per-joint distance after subtracting each hand's wrist (mm).
pub fn mpjpe(pred: &KeypointSet3D, gt: &KeypointSet3D) -> f64 {
    let (rp, rg) = (pred.root(), gt.root());
    mean_pairwise(pred.joints(), gt.joints(), |p, q| ((p - rp) - (q - rg)).norm())
}

/// Error of the predicted right-minus-left root offset (mm).
pub fn mrrpe(
    pred_left: &KeypointSet3D,
    pred_right: &KeypointSet3D,
    gt_left: &KeypointSet3D,
    gt_right: &KeypointSet3D,
) -> f64 {
    ((pred_right.root() - pred_left.root()) - (gt_right.root() - gt_left.root())).norm()
}

/// Mean pixel distance between the projected prediction and 2D ground truth.
pub fn reprojection_error_2d(pred3d: &KeypointSet3D, cam: &CameraIntrinsics, gt2d: &KeypointSet2D) -> Result<f64> {
    let proj = project(cam, pred3d)?;
    Ok(mean_pairwise(proj.points(), gt2d.points(), |p, q| (p - q).norm()))
}

/// Orientation and location of a hand's root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootFrame {
    /// Columns are the frame axes in camera coordinates.
    pub rotation: Matrix3<f64>,
    pub origin: Vector3<f64>,
}

impl RootFrame {
    /// Frame from keypoints alone: origin at the wrist, x toward the index
    /// MCP, z along `(index MCP - wrist) x (pinky MCP - wrist)`.
    pub fn from_keypoints(k: &KeypointSet3D) -> Result<Self> {
        let j = k.joints();
        let origin = j[WRIST];
        let to_index = j[INDEX_MCP] - origin;
        let to_pinky = j[PINKY_MCP] - origin;
        let scale = to_index.norm() * to_pinky.norm();
        let normal = to_index.cross(&to_pinky);
        if !(scale > 0.0) || normal.norm() <= 1e-9 * scale {
            return Err(Error::RootFrame("wrist, index MCP and pinky MCP are collinear".into()));
        }
        let x = to_index.normalize();
        let z = normal.normalize();
        let y = z.cross(&x);
        Ok(Self {
            rotation: Matrix3::from_columns(&[x, y, z]),
            origin,
        })
    }

    pub fn to_local(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (p - self.origin)
    }

    pub fn express(&self, k: &KeypointSet3D) -> KeypointSet3D {
        k.map(|p| self.to_local(p))
    }
}

/// Mean per-joint distance after expressing each hand in its own root
/// frame. Frames default to [`RootFrame::from_keypoints`].
pub fn root_relative_3d_error(
    a: &KeypointSet3D,
    frame_a: Option<&RootFrame>,
    b: &KeypointSet3D,
    frame_b: Option<&RootFrame>,
) -> Result<f64> {
    let fa = match frame_a {
        Some(f) => *f,
        None => RootFrame::from_keypoints(a)?,
    };
    let fb = match frame_b {
        Some(f) => *f,
        None => RootFrame::from_keypoints(b)?,
    };
    Ok(absolute_3d_error(&fa.express(a), &fb.express(b)))
}

/// A pair of hands in one frame; either may be missing.
#[derive(Debug, Clone, Default)]
pub struct TwoHands {
    pub left: Option<KeypointSet3D>,
    pub right: Option<KeypointSet3D>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MrrpeSummary {
    /// NaN when no frame was usable.
    pub mean: f64,
    pub counted: usize,
    pub skipped: usize,
}

/// Mean MRRPE over frames where both hands exist in prediction and ground
/// truth; other frames are skipped and counted.
pub fn mrrpe_batch(pred: &[TwoHands], gt: &[TwoHands]) -> Result<MrrpeSummary> {
    if pred.len() != gt.len() {
        return Err(Error::Dimension {
            what: "MRRPE frames",
            expected: gt.len(),
            actual: pred.len(),
        });
    }
    let mut sum = 0.0;
    let mut counted = 0;
    for (p, g) in pred.iter().zip(gt) {
        if let (Some(pl), Some(pr), Some(gl), Some(gr)) = (&p.left, &p.right, &g.left, &g.right) {
            sum += mrrpe(pl, pr, gl, gr);
            counted += 1;
        }
    }
    Ok(MrrpeSummary {
        mean: if counted > 0 { sum / counted as f64 } else { f64::NAN },
        counted,
        skipped: pred.len() - counted,
    })
}
