//! Geometry and supervision toolkit for crop-based egocentric 3D hand pose
//! estimation.
//!
//! - [`hand_model`]: skinned 21-joint hand and forward kinematics
//! - [`camera`]: pinhole projection and the intrinsics-aware crop encoding
//! - [`metrics`]: crop ambiguity distances and evaluation metrics
//! - [`alignment`]: PnP, shift-augmented PnP and the ambiguity scan
//! - [`softras`]: soft silhouettes, L1 mask loss and silhouette fitting
//! - [`grasp`]: the grasp classification head

// Validation uses `!(x > 0.0)` style tests on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alignment;
pub mod camera;
pub mod error;
pub mod grasp;
pub mod hand_model;
pub mod metrics;
pub mod rotation;
pub mod softras;

pub use error::{Error, ErrorKind, Result};
