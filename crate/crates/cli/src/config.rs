use std::path::{Path, PathBuf};

use handcrop::alignment::{RootAlignment, ScanMode};
use handcrop::camera::CameraIntrinsics;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult, Tag};

/// Camera used by a subcommand: an intrinsics file, or a square-pixel
/// camera with the principal point at the image center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraSpec {
    pub intrinsics: Option<PathBuf>,
    pub width: u32,
    pub height: u32,
    pub fov_deg: f64,
}

impl CameraSpec {
    fn fov(width: u32, height: u32) -> Self {
        Self {
            intrinsics: None,
            width,
            height,
            fov_deg: 60.0,
        }
    }

    pub fn build(&self, inputs: &mut Vec<crate::output::FileEntry>) -> CliResult<CameraIntrinsics> {
        match &self.intrinsics {
            Some(path) => {
                let text = crate::output::read_input_string(path, inputs)?;
                CameraIntrinsics::from_json(&text).tag("camera")
            }
            None => CameraIntrinsics::from_horizontal_fov(self.width, self.height, self.fov_deg).tag("camera"),
        }
    }
}

impl Default for CameraSpec {
    fn default() -> Self {
        Self::fov(320, 240)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub camera: CameraSpec,
    pub population_size: usize,
    /// Wrist depth range, mm.
    pub depth_range: [f64; 2],
    pub rotation_jitter: f64,
    pub takes: usize,
    pub take_jitter: f64,
    /// Shifted keypoints stay this far inside the image, px.
    pub shift_border_px: f64,
    pub root_alignment: RootAlignment,
    pub modes: Vec<ScanMode>,
    /// Bucket thresholds for the scatter and the separation check, px.
    pub near_px: f64,
    pub far_px: f64,
    pub max_centered_2d_px: f64,
    /// `--check` passes when the far bucket maximum exceeds this multiple
    /// of the near bucket maximum.
    pub check_ratio: f64,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            camera: CameraSpec::default(),
            population_size: 500,
            depth_range: [250.0, 600.0],
            rotation_jitter: 0.4,
            takes: 4,
            take_jitter: 0.05,
            shift_border_px: 10.0,
            root_alignment: RootAlignment::Location,
            modes: ScanMode::ALL.to_vec(),
            near_px: 20.0,
            far_px: 100.0,
            max_centered_2d_px: 2.0,
            check_ratio: 1.0,
        }
    }
}

/// A hand pose for the single-hand subcommands: a parameter file, or the
/// built-in palm-facing pose at the given wrist position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoseSpec {
    pub params: Option<PathBuf>,
    pub wrist_mm: [f64; 3],
}

impl Default for PoseSpec {
    fn default() -> Self {
        Self {
            params: None,
            wrist_mm: [0.0, 80.0, 400.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoSection {
    pub camera: CameraSpec,
    pub pose: PoseSpec,
    /// Lateral wrist offsets, mm.
    pub offsets_mm: Vec<f64>,
}

impl Default for DemoSection {
    fn default() -> Self {
        Self {
            camera: CameraSpec::fov(640, 480),
            pose: PoseSpec::default(),
            offsets_mm: vec![-200.0, -100.0, 0.0, 100.0, 200.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SilhouetteSection {
    pub camera: CameraSpec,
    pub pose: PoseSpec,
    /// Rendering sharpness, px²; unset uses 1e-4 of the squared diagonal.
    pub sigma: Option<f64>,
    pub amodal: bool,
    pub steps: usize,
    pub step_size: f64,
    pub translation_scale: f64,
    pub min_relative_decrease: f64,
}

impl Default for SilhouetteSection {
    fn default() -> Self {
        Self {
            camera: CameraSpec::fov(128, 128),
            pose: PoseSpec::default(),
            sigma: None,
            amodal: true,
            steps: 500,
            step_size: 1.0,
            translation_scale: 100.0,
            min_relative_decrease: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraspSection {
    /// Training data; unset generates the toy cluster dataset.
    pub dataset: Option<PathBuf>,
    pub per_class: usize,
    pub spread: f64,
    pub noise: f64,
    pub epochs: usize,
    pub lr: f64,
    pub hidden: [usize; 3],
    pub extra_input: usize,
    pub freeze_hidden: bool,
}

impl Default for GraspSection {
    fn default() -> Self {
        Self {
            dataset: None,
            per_class: 32,
            spread: 0.5,
            noise: 0.1,
            epochs: 500,
            lr: 0.05,
            hidden: [128, 64, 32],
            extra_input: 0,
            freeze_hidden: false,
        }
    }
}

/// One JSON file configures every experiment; command-line flags override
/// it. Relative paths are resolved against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// External hand model in the JSON model format; unset uses the
    /// built-in procedural hand.
    pub model: Option<PathBuf>,
    pub scan: ScanSection,
    pub demo: DemoSection,
    pub silhouette: SilhouetteSection,
    pub grasp: GraspSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            out_dir: PathBuf::from("out"),
            model: None,
            scan: ScanSection::default(),
            demo: DemoSection::default(),
            silhouette: SilhouetteSection::default(),
            grasp: GraspSection::default(),
        }
    }
}

fn rebase(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path, inputs: &mut Vec<crate::output::FileEntry>) -> CliResult<Self> {
        let text = crate::output::read_input_string(path, inputs)?;
        let mut cfg: Self = serde_json::from_str(&text).tag("config")?;
        let base = path.parent().unwrap_or(Path::new("."));
        rebase(base, &mut cfg.model);
        rebase(base, &mut cfg.scan.camera.intrinsics);
        rebase(base, &mut cfg.demo.camera.intrinsics);
        rebase(base, &mut cfg.demo.pose.params);
        rebase(base, &mut cfg.silhouette.camera.intrinsics);
        rebase(base, &mut cfg.silhouette.pose.params);
        rebase(base, &mut cfg.grasp.dataset);
        if cfg.out_dir.is_relative() {
            cfg.out_dir = base.join(&cfg.out_dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: &str| Err(CliError::validation("config", m));
        let s = &self.scan;
        if s.population_size == 0 {
            return bad("scan.population_size must be positive");
        }
        if !(s.depth_range[0] > 0.0 && s.depth_range[0] <= s.depth_range[1]) {
            return bad("scan.depth_range must be positive and ordered");
        }
        if !(s.near_px >= 0.0 && s.far_px >= s.near_px && s.max_centered_2d_px > 0.0) {
            return bad("scan bucket thresholds must satisfy 0 <= near_px <= far_px and max_centered_2d_px > 0");
        }
        if !(s.shift_border_px >= 0.0 && s.rotation_jitter >= 0.0 && s.take_jitter >= 0.0 && s.check_ratio > 0.0) {
            return bad("scan border, jitters and check_ratio must be non-negative (check_ratio positive)");
        }
        if s.modes.is_empty() {
            return bad("scan.modes must list at least one mode");
        }
        if let Some(sigma) = self.silhouette.sigma {
            if !(sigma > 0.0) {
                return bad("silhouette.sigma must be positive");
            }
        }
        if !(self.silhouette.step_size >= 0.0 && self.silhouette.translation_scale > 0.0) {
            return bad("silhouette step_size must be non-negative and translation_scale positive");
        }
        let g = &self.grasp;
        if g.per_class == 0 || g.epochs == 0 || !(g.lr >= 0.0) || g.hidden.contains(&0) {
            return bad("grasp per_class, epochs and hidden widths must be positive and lr non-negative");
        }
        if !(g.spread >= 0.0 && g.noise >= 0.0) {
            return bad("grasp spread and noise must be non-negative");
        }
        Ok(())
    }
}
