//! Soft silhouette rendering, the L1 mask loss with analytic vertex
//! gradients, and silhouette-driven pose fitting.

mod fit;
mod mask;
mod raster;

pub use fit::{fit_pose_to_mask, FitConfig, FitResult, FitStop};
pub use mask::MaskImage;
pub use raster::{
    cutoff_band, default_sigma, render_soft_silhouette, silhouette_l1_loss, silhouette_loss_grad_vertices, L1Loss,
    SilhouetteGradient, SoftSilhouette,
};
