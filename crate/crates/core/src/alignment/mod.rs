//! Perspective-n-point alignment and the crop ambiguity scan.

mod pnp;
mod population;
mod scan;

pub use pnp::{
    dlt_initialize, pnp_align, pnp_align_with_shift, refine_pose, PnpSolution, RigidPose, ShiftedAlignment,
    MAX_ITERATIONS, STEP_TOLERANCE,
};
pub use population::{sample_articulation, sample_hand, synthetic_population, JointRange, PopulationConfig};
pub use scan::{
    ambiguity_record, ambiguity_scan, sample_shift, separation, RootAlignment, ScanConfig, ScanFailure, ScanMode,
    ScanOutput, SeparationSummary,
};
