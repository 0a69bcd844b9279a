use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rotation::{log_rotation, rodrigues};

/// Number of articulated joints driven by `theta`.
pub const NUM_ARTICULATED: usize = 15;

/// Default rank of the shape basis.
pub const DEFAULT_SHAPE_RANK: usize = 10;

/// Shape coefficients, per-joint axis-angle articulation and the global root pose.
///
/// `theta[k]` rotates the k-th articulated joint (thumb CMC, MCP, IP, then
/// MCP, PIP, DIP for index through pinky) relative to its parent. The root
/// rotation acts about the model origin, and `root_trans` is added afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HandParamsFile", into = "HandParamsFile")]
pub struct HandParams {
    pub beta: Vec<f64>,
    pub theta: [Vector3<f64>; NUM_ARTICULATED],
    pub root_rot: Vector3<f64>,
    pub root_trans: Vector3<f64>,
}

impl HandParams {
    /// All-zero parameters for a model with `shape_rank` coefficients.
    pub fn zeros(shape_rank: usize) -> Self {
        Self {
            beta: vec![0.0; shape_rank],
            theta: [Vector3::zeros(); NUM_ARTICULATED],
            root_rot: Vector3::zeros(),
            root_trans: Vector3::zeros(),
        }
    }

    pub fn with_root(mut self, root_rot: Vector3<f64>, root_trans: Vector3<f64>) -> Self {
        self.root_rot = root_rot;
        self.root_trans = root_trans;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.beta.iter().all(|v| v.is_finite())
            && self.theta.iter().flat_map(|t| t.iter()).all(|v| v.is_finite())
            && self.root_rot.iter().all(|v| v.is_finite())
            && self.root_trans.iter().all(|v| v.is_finite());
        if finite {
            Ok(())
        } else {
            Err(Error::Parameter("hand parameters contain NaN or Inf".into()))
        }
    }

    pub fn root_rotation(&self) -> Matrix3<f64> {
        rodrigues(&self.root_rot)
    }

    /// Parameters whose posed hand is `rotation * x + translation` of this one.
    pub fn rigidly_moved(&self, rotation: &Matrix3<f64>, translation: &Vector3<f64>) -> Self {
        let mut out = self.clone();
        out.root_rot = log_rotation(&(rotation * self.root_rotation()));
        out.root_trans = rotation * self.root_trans + translation;
        out
    }

    /// Articulation flattened to the 45-vector used by the grasp head.
    pub fn theta_flat(&self) -> [f64; 3 * NUM_ARTICULATED] {
        std::array::from_fn(|i| self.theta[i / 3][i % 3])
    }

    /// Packs `[root_trans, root_rot, theta]` into one 51-vector.
    pub fn pose_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(6 + 3 * NUM_ARTICULATED);
        v.extend(self.root_trans.iter());
        v.extend(self.root_rot.iter());
        v.extend(self.theta.iter().flat_map(|t| t.iter().copied()));
        v
    }

    /// Inverse of [`HandParams::pose_vector`]; `beta` is kept.
    pub fn with_pose_vector(&self, v: &[f64]) -> Self {
        assert_eq!(v.len(), 6 + 3 * NUM_ARTICULATED);
        let mut out = self.clone();
        out.root_trans = Vector3::new(v[0], v[1], v[2]);
        out.root_rot = Vector3::new(v[3], v[4], v[5]);
        for k in 0..NUM_ARTICULATED {
            out.theta[k] = Vector3::new(v[6 + 3 * k], v[7 + 3 * k], v[8 + 3 * k]);
        }
        out
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// On-disk layout of [`HandParams`].
#[derive(Debug, Clone, Serialize, Deserialize)]
struct HandParamsFile {
    beta: Vec<f64>,
    theta: Vec<[f64; 3]>,
    root_rot: [f64; 3],
    root_trans: [f64; 3],
}

impl TryFrom<HandParamsFile> for HandParams {
    type Error = Error;

    fn try_from(f: HandParamsFile) -> Result<Self> {
        if f.theta.len() != NUM_ARTICULATED {
            return Err(Error::Dimension {
                what: "theta",
                expected: NUM_ARTICULATED,
                actual: f.theta.len(),
            });
        }
        let p = HandParams {
            beta: f.beta,
            theta: std::array::from_fn(|k| Vector3::from(f.theta[k])),
            root_rot: Vector3::from(f.root_rot),
            root_trans: Vector3::from(f.root_trans),
        };
        p.validate()?;
        Ok(p)
    }
}

impl From<HandParams> for HandParamsFile {
    fn from(p: HandParams) -> Self {
        HandParamsFile {
            beta: p.beta,
            theta: p.theta.iter().map(|t| [t.x, t.y, t.z]).collect(),
            root_rot: p.root_rot.into(),
            root_trans: p.root_trans.into(),
        }
    }
}
