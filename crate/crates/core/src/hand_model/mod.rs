//! Parametric articulated hand: shape blending, a 21-joint kinematic tree and
//! linear blend skinning.

mod keypoints;
mod model;
mod params;
mod procedural;

pub use keypoints::{
    KeypointSet2D, KeypointSet3D, CANONICAL_PARENTS, FINGERTIPS, INDEX_MCP, JOINT_NAMES, MIDDLE_TIP, NUM_JOINTS,
    PINKY_MCP, WRIST,
};
pub use model::{ModelFile, PosedHand, ShapedHand, SkinnedHandModel};
pub use params::{HandParams, DEFAULT_SHAPE_RANK, NUM_ARTICULATED};
pub use procedural::{build_procedural_hand, FingerSpec, HandSpec};

/// Mirrors a right-hand keypoint set into a left hand by negating x.
pub fn mirror_x(k: &KeypointSet3D) -> KeypointSet3D {
    k.map(|p| nalgebra::Vector3::new(-p.x, p.y, p.z))
}
