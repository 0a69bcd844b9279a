use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of hand keypoints: wrist, then four per finger from thumb to pinky.
pub const NUM_JOINTS: usize = 21;

/// Joint names in storage order.
///
/// | index | joint        | index | joint      |
/// |-------|--------------|-------|------------|
/// | 0     | wrist        | 11    | middle DIP |
/// | 1     | thumb CMC    | 12    | middle tip |
/// | 2     | thumb MCP    | 13    | ring MCP   |
/// | 3     | thumb IP     | 14    | ring PIP   |
/// | 4     | thumb tip    | 15    | ring DIP   |
/// | 5     | index MCP    | 16    | ring tip   |
/// | 6     | index PIP    | 17    | pinky MCP  |
/// | 7     | index DIP    | 18    | pinky PIP  |
/// | 8     | index tip    | 19    | pinky DIP  |
/// | 9     | middle MCP   | 20    | pinky tip  |
/// | 10    | middle PIP   |       |            |
pub const JOINT_NAMES: [&str; NUM_JOINTS] = [
    "wrist",
    "thumb_cmc",
    "thumb_mcp",
    "thumb_ip",
    "thumb_tip",
    "index_mcp",
    "index_pip",
    "index_dip",
    "index_tip",
    "middle_mcp",
    "middle_pip",
    "middle_dip",
    "middle_tip",
    "ring_mcp",
    "ring_pip",
    "ring_dip",
    "ring_tip",
    "pinky_mcp",
    "pinky_pip",
    "pinky_dip",
    "pinky_tip",
];

pub const WRIST: usize = 0;
pub const INDEX_MCP: usize = 5;
pub const MIDDLE_TIP: usize = 12;
pub const PINKY_MCP: usize = 17;
pub const FINGERTIPS: [usize; 5] = [4, 8, 12, 16, 20];

/// Parent of each joint in the canonical ordering; the wrist has none.
pub const CANONICAL_PARENTS: [Option<usize>; NUM_JOINTS] = [
    None,
    Some(0),
    Some(1),
    Some(2),
    Some(3),
    Some(0),
    Some(5),
    Some(6),
    Some(7),
    Some(0),
    Some(9),
    Some(10),
    Some(11),
    Some(0),
    Some(13),
    Some(14),
    Some(15),
    Some(0),
    Some(17),
    Some(18),
    Some(19),
];

/// 21 joints in millimetres, camera (or model) frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 3]>", into = "Vec<[f64; 3]>")]
pub struct KeypointSet3D {
    joints: [Vector3<f64>; NUM_JOINTS],
}

impl KeypointSet3D {
    pub fn new(joints: [Vector3<f64>; NUM_JOINTS]) -> Result<Self> {
        for (i, j) in joints.iter().enumerate() {
            if !j.iter().all(|v| v.is_finite()) {
                return Err(Error::Parameter(format!("joint {i} is not finite")));
            }
        }
        Ok(Self { joints })
    }

    pub fn from_slice(joints: &[Vector3<f64>]) -> Result<Self> {
        let arr: [Vector3<f64>; NUM_JOINTS] = joints.try_into().map_err(|_| Error::Dimension {
            what: "3D keypoints",
            expected: NUM_JOINTS,
            actual: joints.len(),
        })?;
        Self::new(arr)
    }

    pub fn joints(&self) -> &[Vector3<f64>; NUM_JOINTS] {
        &self.joints
    }

    pub fn root(&self) -> Vector3<f64> {
        self.joints[WRIST]
    }

    pub fn centroid(&self) -> Vector3<f64> {
        self.joints.iter().sum::<Vector3<f64>>() / NUM_JOINTS as f64
    }

    /// Applies `x -> f(x)` to every joint. The result is not re-validated,
    /// so `f` must keep coordinates finite.
    pub fn map(&self, f: impl Fn(&Vector3<f64>) -> Vector3<f64>) -> Self {
        Self {
            joints: std::array::from_fn(|i| f(&self.joints[i])),
        }
    }

    pub fn translated(&self, t: &Vector3<f64>) -> Self {
        self.map(|p| p + t)
    }
}

impl TryFrom<Vec<[f64; 3]>> for KeypointSet3D {
    type Error = Error;

    fn try_from(v: Vec<[f64; 3]>) -> Result<Self> {
        let pts: Vec<Vector3<f64>> = v.iter().map(|p| Vector3::from(*p)).collect();
        Self::from_slice(&pts)
    }
}

impl From<KeypointSet3D> for Vec<[f64; 3]> {
    fn from(k: KeypointSet3D) -> Self {
        k.joints.iter().map(|p| [p.x, p.y, p.z]).collect()
    }
}

/// 21 image points in pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct KeypointSet2D {
    points: [Vector2<f64>; NUM_JOINTS],
}

impl KeypointSet2D {
    pub fn new(points: [Vector2<f64>; NUM_JOINTS]) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if !p.iter().all(|v| v.is_finite()) {
                return Err(Error::Parameter(format!("point {i} is not finite")));
            }
        }
        Ok(Self { points })
    }

    pub fn from_slice(points: &[Vector2<f64>]) -> Result<Self> {
        let arr: [Vector2<f64>; NUM_JOINTS] = points.try_into().map_err(|_| Error::Dimension {
            what: "2D keypoints",
            expected: NUM_JOINTS,
            actual: points.len(),
        })?;
        Self::new(arr)
    }

    pub fn points(&self) -> &[Vector2<f64>; NUM_JOINTS] {
        &self.points
    }

    pub fn centroid(&self) -> Vector2<f64> {
        self.points.iter().sum::<Vector2<f64>>() / NUM_JOINTS as f64
    }

    pub fn map(&self, f: impl Fn(&Vector2<f64>) -> Vector2<f64>) -> Self {
        Self {
            points: std::array::from_fn(|i| f(&self.points[i])),
        }
    }

    pub fn shifted(&self, shift: &Vector2<f64>) -> Self {
        self.map(|p| p + shift)
    }

    /// Axis-aligned bounds as `(min, max)`.
    pub fn bounds(&self) -> (Vector2<f64>, Vector2<f64>) {
        let mut lo = Vector2::repeat(f64::INFINITY);
        let mut hi = Vector2::repeat(f64::NEG_INFINITY);
        for p in &self.points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo, hi)
    }
}

impl TryFrom<Vec<[f64; 2]>> for KeypointSet2D {
    type Error = Error;

    fn try_from(v: Vec<[f64; 2]>) -> Result<Self> {
        let pts: Vec<Vector2<f64>> = v.iter().map(|p| Vector2::from(*p)).collect();
        Self::from_slice(&pts)
    }
}

impl From<KeypointSet2D> for Vec<[f64; 2]> {
    fn from(k: KeypointSet2D) -> Self {
        k.points.iter().map(|p| [p.x, p.y]).collect()
    }
}
