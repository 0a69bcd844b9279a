use std::path::{Path, PathBuf};

use handcrop::alignment::{
    ambiguity_scan, pnp_align, pnp_align_with_shift, separation, synthetic_population, PopulationConfig, RigidPose,
    ScanConfig, ScanMode, SeparationSummary,
};
use handcrop::camera::{
    demo_shape_change, kpe_dense, kpe_sparse, perspective_demo, project, CameraIntrinsics, CropBox,
};
use handcrop::grasp::{toy_grasp_dataset, train_grasp_toy, GraspConfig, GraspDataset, TrainConfig};
use handcrop::hand_model::{
    build_procedural_hand, HandParams, HandSpec, KeypointSet2D, KeypointSet3D, SkinnedHandModel,
};
use handcrop::metrics::{
    absolute_3d_error, centered_2d_error, crop_pixel_distance, mpjpe, mrrpe, records_to_csv, reprojection_error_2d,
    root_relative_3d_error, AmbiguityRecord,
};
use handcrop::softras::{default_sigma, fit_pose_to_mask, render_soft_silhouette, FitConfig, MaskImage};
use handcrop::Error;
use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{CameraSpec, ExperimentConfig, PoseSpec};
use crate::error::{CliError, CliResult, Tag};
use crate::output::{read_input, read_input_string, FileEntry, OutputDir};
use crate::svg::{self, Series};

/// Effective configuration plus the inputs read so far, shared by all
/// subcommands.
pub struct Context {
    pub cfg: ExperimentConfig,
    pub inputs: Vec<FileEntry>,
}

impl Context {
    fn model(&mut self) -> CliResult<SkinnedHandModel> {
        match self.cfg.model.clone() {
            Some(path) => {
                let text = read_input_string(&path, &mut self.inputs)?;
                SkinnedHandModel::from_json(&text).tag("hand_model")
            }
            None => build_procedural_hand(&HandSpec::default()).tag("hand_model"),
        }
    }

    fn camera(&mut self, spec: &CameraSpec, override_path: Option<&Path>) -> CliResult<CameraIntrinsics> {
        let mut spec = spec.clone();
        if let Some(p) = override_path {
            spec.intrinsics = Some(p.to_path_buf());
        }
        spec.build(&mut self.inputs)
    }

    fn pose(
        &mut self,
        spec: &PoseSpec,
        override_path: Option<&Path>,
        model: &SkinnedHandModel,
    ) -> CliResult<HandParams> {
        let path = override_path.map(Path::to_path_buf).or_else(|| spec.params.clone());
        let params = match path {
            Some(p) => {
                let text = read_input_string(&p, &mut self.inputs)?;
                HandParams::from_json(&text).tag("hand_model")?
            }
            None => palm_facing_pose(model.shape_rank(), spec.wrist_mm),
        };
        if params.beta.len() != model.shape_rank() {
            return Err(CliError::validation(
                "hand_model",
                format!(
                    "parameters have {} shape coefficients, model expects {}",
                    params.beta.len(),
                    model.shape_rank()
                ),
            ));
        }
        Ok(params)
    }

    fn json_input<T: for<'de> Deserialize<'de>>(&mut self, path: &Path, module: &'static str) -> CliResult<T> {
        let text = read_input_string(path, &mut self.inputs)?;
        serde_json::from_str(&text).map_err(|e| CliError::validation(module, format!("{}: {e}", path.display())))
    }

    /// Configuration as recorded in manifests; the output directory is left
    /// out so runs into different directories compare equal.
    fn manifest_config(&self) -> Value {
        let mut v = serde_json::to_value(&self.cfg).expect("config serializes");
        if let Value::Object(m) = &mut v {
            m.remove("out_dir");
        }
        v
    }

    fn finish(self, out: OutputDir, command: &str, seed: Option<u64>) -> CliResult<()> {
        let config = self.manifest_config();
        out.finish(command, seed, &self.inputs, config)
    }
}

/// Fingers toward the top of the image with the palm facing the camera.
pub fn palm_facing_pose(shape_rank: usize, wrist: [f64; 3]) -> HandParams {
    HandParams::zeros(shape_rank).with_root(Vector3::new(std::f64::consts::PI, 0.0, 0.0), Vector3::from(wrist))
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn print_json<T: Serialize>(v: &T) {
    print!("{}", pretty(v));
}

// ---------------------------------------------------------------------------
// ambiguity-scan

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum YMetric {
    #[default]
    Rootrel,
    Abs,
}

pub struct ScanOptions {
    pub modes: Vec<ScanMode>,
    pub check: bool,
    pub y_metric: YMetric,
}

#[derive(Serialize)]
struct SeparationReport {
    near_count: usize,
    far_count: usize,
    near_max_rootrel: f64,
    far_max_rootrel: f64,
    ratio: Option<f64>,
}

impl From<SeparationSummary> for SeparationReport {
    fn from(s: SeparationSummary) -> Self {
        let r = s.ratio();
        Self {
            near_count: s.near_count,
            far_count: s.far_count,
            near_max_rootrel: s.near_max_rootrel,
            far_max_rootrel: s.far_max_rootrel,
            ratio: r.is_finite().then_some(r),
        }
    }
}

fn scatter_svg(records: &[AmbiguityRecord], mode: ScanMode, near: f64, far: f64, y: YMetric) -> String {
    let mut buckets: [Vec<(f64, f64)>; 3] = Default::default();
    for r in records {
        let yv = match y {
            YMetric::Rootrel => r.rootrel_3d_err,
            YMetric::Abs => r.abs_3d_err,
        };
        let b = if r.crop_px_dist < near {
            1
        } else if r.crop_px_dist > far {
            2
        } else {
            0
        };
        buckets[b].push((r.centered_2d_err, yv));
    }
    let [mid, nearp, farp] = buckets;
    let series = [
        Series {
            label: format!("crop {near}-{far} px"),
            color: "#9a9a9a",
            points: mid,
        },
        Series {
            label: format!("crop < {near} px"),
            color: "#1f5fbf",
            points: nearp,
        },
        Series {
            label: format!("crop > {far} px"),
            color: "#d02a2a",
            points: farp,
        },
    ];
    let y_label = match y {
        YMetric::Rootrel => "root-relative 3D error (mm)",
        YMetric::Abs => "absolute 3D error (mm)",
    };
    svg::scatter(
        &format!("Distances to the reference hand ({})", mode.as_str()),
        "centered 2D keypoint error (px)",
        y_label,
        &series,
    )
}

pub fn ambiguity_scan_cmd(mut ctx: Context, opts: ScanOptions) -> CliResult<()> {
    let s = ctx.cfg.scan.clone();
    let seed = ctx.cfg.seed;
    let cam = ctx.camera(&s.camera, None)?;
    let model = ctx.model()?;
    let pop_cfg = PopulationConfig {
        size: s.population_size,
        seed,
        depth_min: s.depth_range[0],
        depth_max: s.depth_range[1],
        rotation_jitter: s.rotation_jitter,
        takes: s.takes,
        take_jitter: s.take_jitter,
        ..PopulationConfig::default()
    };
    let population = synthetic_population(&cam, model.shape_rank(), &pop_cfg).tag("alignment")?;
    let modes = if opts.modes.is_empty() {
        s.modes.clone()
    } else {
        opts.modes.clone()
    };

    let mut out = OutputDir::create(&ctx.cfg.out_dir)?;
    let mut combined = Vec::new();
    let mut per_mode = Vec::new();
    for mode in modes {
        let scan_cfg = ScanConfig {
            mode,
            seed: seed.wrapping_add(1),
            shift_border: s.shift_border_px,
            root_alignment: s.root_alignment,
        };
        let result = ambiguity_scan(&population[0], &population, &model, &cam, &scan_cfg).tag("alignment")?;
        let name = mode.as_str();
        out.write(
            &format!("records_{name}.csv"),
            records_to_csv(&result.records).as_bytes(),
        )?;
        out.write(&format!("failures_{name}.json"), pretty(&result.failures).as_bytes())?;
        out.write(
            &format!("scatter_{name}.svg"),
            scatter_svg(&result.records, mode, s.near_px, s.far_px, opts.y_metric).as_bytes(),
        )?;
        let sep = separation(&result.records, s.max_centered_2d_px, s.near_px, s.far_px);
        per_mode.push(json!({
            "mode": name,
            "records": result.records.len(),
            "failures": result.failures.len(),
            "separation": SeparationReport::from(sep),
        }));
        combined.extend(result.records);
    }
    let sep = separation(&combined, s.max_centered_2d_px, s.near_px, s.far_px);
    let passed = sep.near_count > 0 && sep.far_count > 0 && sep.far_max_rootrel > s.check_ratio * sep.near_max_rootrel;
    let summary = json!({
        "root_alignment": s.root_alignment.as_str(),
        "thresholds": {"near_px": s.near_px, "far_px": s.far_px, "max_centered_2d_px": s.max_centered_2d_px},
        "modes": per_mode,
        "combined": SeparationReport::from(sep),
        "check": if opts.check { json!({"required_ratio": s.check_ratio, "passed": passed}) } else { Value::Null },
    });
    out.write("summary.json", pretty(&summary).as_bytes())?;
    ctx.finish(out, "ambiguity-scan", Some(seed))?;
    print_json(&summary);
    if opts.check && !passed {
        return Err(CliError::validation(
            "alignment",
            format!(
                "separation check failed: far max {:.3} mm ({} records) vs near max {:.3} mm ({} records), required ratio > {}",
                sep.far_max_rootrel, sep.far_count, sep.near_max_rootrel, sep.near_count, s.check_ratio
            ),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// kpe

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum KpeKind {
    Sparse,
    Dense,
}

pub fn kpe_cmd(
    mut ctx: Context,
    intrinsics: &Path,
    crop: &[f64],
    kind: KpeKind,
    grid: usize,
    csv: Option<&Path>,
) -> CliResult<()> {
    let cam = ctx.camera(&CameraSpec::default(), Some(intrinsics))?;
    if crop.len() != 4 {
        return Err(CliError::validation(
            "camera",
            format!("--box needs 4 values, got {}", crop.len()),
        ));
    }
    let crop = CropBox::new(crop[0], crop[1], crop[2], crop[3]).tag("camera")?;
    let bounds: [f64; 4] = crop.into();
    match kind {
        KpeKind::Sparse => {
            let enc = kpe_sparse(&cam, &crop);
            let points: Vec<[f64; 2]> = crop.encoding_points().iter().map(|&(x, y)| [x, y]).collect();
            print_json(&json!({"encoding": "sparse", "box": bounds, "points": points, "values": enc.values}));
        }
        KpeKind::Dense => {
            let map = kpe_dense(&cam, &crop, grid).tag("camera")?;
            if let Some(path) = csv {
                std::fs::write(path, map.to_csv()).tag("camera")?;
            }
            let cells: Vec<&Vec<f64>> = map.cells.iter().map(|c| &c.values).collect();
            print_json(&json!({"encoding": "dense", "box": bounds, "grid": grid, "cells": cells}));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// project

pub fn project_cmd(
    mut ctx: Context,
    intrinsics: Option<&Path>,
    params: Option<&Path>,
    points: Option<&Path>,
) -> CliResult<()> {
    let demo_cam = ctx.cfg.demo.camera.clone();
    let cam = ctx.camera(&demo_cam, intrinsics)?;
    let joints: KeypointSet3D = match (params, points) {
        (Some(_), Some(_)) => {
            return Err(CliError::validation(
                "camera",
                "give either --params or --points, not both",
            ))
        }
        (None, Some(p)) => ctx.json_input(p, "camera")?,
        (params, None) => {
            let model = ctx.model()?;
            let pose_spec = ctx.cfg.demo.pose.clone();
            let hp = ctx.pose(&pose_spec, params, &model)?;
            model.forward_kinematics(&hp).tag("hand_model")?.joints
        }
    };
    let uv = project(&cam, &joints).tag("camera")?;
    print_json(&json!({"keypoints_3d": joints, "keypoints_2d": uv}));
    Ok(())
}

// ---------------------------------------------------------------------------
// metrics

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
#[allow(clippy::large_enum_variant)]
enum HandsFile {
    Single(KeypointSet3D),
    Pair {
        #[serde(default)]
        left: Option<KeypointSet3D>,
        #[serde(default)]
        right: Option<KeypointSet3D>,
    },
}

impl HandsFile {
    fn hands(&self) -> Vec<(&'static str, Option<&KeypointSet3D>)> {
        match self {
            HandsFile::Single(k) => vec![("hand", Some(k))],
            HandsFile::Pair { left, right } => vec![("left", left.as_ref()), ("right", right.as_ref())],
        }
    }
}

pub fn metrics_cmd(mut ctx: Context, pred: &Path, gt: &Path, intrinsics: Option<&Path>) -> CliResult<()> {
    let pred: HandsFile = ctx.json_input(pred, "metrics")?;
    let gt: HandsFile = ctx.json_input(gt, "metrics")?;
    let cam = match intrinsics {
        Some(p) => Some(ctx.camera(&CameraSpec::default(), Some(p))?),
        None => None,
    };
    let (ph, gh) = (pred.hands(), gt.hands());
    if ph.len() != gh.len() {
        return Err(CliError::validation(
            "metrics",
            "prediction and ground truth list different hands",
        ));
    }
    let mut hands = serde_json::Map::new();
    for ((name, p), (_, g)) in ph.iter().zip(&gh) {
        let (Some(p), Some(g)) = (p, g) else { continue };
        let mut m = json!({
            "mpjpe": mpjpe(p, g),
            "root_relative_3d": root_relative_3d_error(p, None, g, None).tag("metrics")?,
            "absolute_3d": absolute_3d_error(p, g),
        });
        if let Some(cam) = &cam {
            let gt2d = project(cam, g).tag("metrics")?;
            let pred2d = project(cam, p).tag("metrics")?;
            m["reprojection_2d"] = json!(reprojection_error_2d(p, cam, &gt2d).tag("metrics")?);
            m["centered_2d"] = json!(centered_2d_error(&pred2d, &gt2d));
            m["crop_px_dist"] = json!(crop_pixel_distance(&pred2d, &gt2d));
        }
        hands.insert(name.to_string(), m);
    }
    let mrrpe_value = match (&pred, &gt) {
        (
            HandsFile::Pair {
                left: Some(pl),
                right: Some(pr),
            },
            HandsFile::Pair {
                left: Some(gl),
                right: Some(gr),
            },
        ) => json!(mrrpe(pl, pr, gl, gr)),
        _ => Value::Null,
    };
    print_json(&json!({"hands": hands, "mrrpe": mrrpe_value}));
    Ok(())
}

// ---------------------------------------------------------------------------
// pnp

pub fn pnp_cmd(
    mut ctx: Context,
    intrinsics: &Path,
    ref2d: &Path,
    hand3d: &Path,
    shift: Option<&[f64]>,
) -> CliResult<()> {
    let cam = ctx.camera(&CameraSpec::default(), Some(intrinsics))?;
    let ref2d: KeypointSet2D = ctx.json_input(ref2d, "alignment")?;
    let hand3d: KeypointSet3D = ctx.json_input(hand3d, "alignment")?;
    let report = match shift {
        None => {
            let sol = pnp_align(&ref2d, &hand3d, &cam).tag("alignment")?;
            json!({
                "pose": sol.pose,
                "residual_px": sol.residual,
                "iterations": sol.iterations,
                "converged": sol.converged,
                "shift": [0.0, 0.0],
            })
        }
        Some(s) => {
            if s.len() != 2 {
                return Err(CliError::validation("alignment", "--shift needs two values"));
            }
            let sol = pnp_align_with_shift(&ref2d, &hand3d, &cam, Vector2::new(s[0], s[1])).tag("alignment")?;
            json!({"pose": sol.pose, "residual_px": sol.residual, "shift": [sol.shift.x, sol.shift.y]})
        }
    };
    let pose: RigidPose = serde_json::from_value(report["pose"].clone()).tag("alignment")?;
    let aligned = pose.apply(&hand3d);
    let mut out = OutputDir::create(&ctx.cfg.out_dir)?;
    out.write("pose.json", pretty(&report).as_bytes())?;
    out.write("aligned_hand3d.json", pretty(&aligned).as_bytes())?;
    ctx.finish(out, "pnp", None)?;
    print_json(&report);
    Ok(())
}

// ---------------------------------------------------------------------------
// perspective-demo

const PALETTE: [&str; 6] = ["#1f5fbf", "#2a9d4a", "#9a9a9a", "#e08a1e", "#d02a2a", "#7a3fb0"];

fn finger_chains(k: &KeypointSet2D) -> Vec<Vec<(f64, f64)>> {
    let c = k.centroid();
    let p = |i: usize| (k.points()[i].x - c.x, k.points()[i].y - c.y);
    (0..5)
        .map(|f| std::iter::once(0).chain(1 + 4 * f..5 + 4 * f).map(p).collect())
        .collect()
}

pub fn perspective_demo_cmd(mut ctx: Context, params: Option<&Path>, offsets: Option<&[f64]>) -> CliResult<()> {
    let d = ctx.cfg.demo.clone();
    let cam = ctx.camera(&d.camera, None)?;
    let model = ctx.model()?;
    let hp = ctx.pose(&d.pose, params, &model)?;
    let offsets = offsets.map(<[f64]>::to_vec).unwrap_or(d.offsets_mm);
    if offsets.is_empty() {
        return Err(CliError::validation(
            "camera",
            "perspective demo needs at least one offset",
        ));
    }
    let projections = perspective_demo(&cam, &model, &hp, &offsets).tag("camera")?;
    let reference = &projections[offsets.len() / 2];
    let rows: Vec<Value> = offsets
        .iter()
        .zip(&projections)
        .map(|(dx, k)| {
            json!({
                "offset_mm": dx,
                "keypoints_2d": k,
                "crop_px_dist": crop_pixel_distance(reference, k),
                "centered_2d_err": centered_2d_error(reference, k),
            })
        })
        .collect();
    let summary = json!({
        "reference_offset_mm": offsets[offsets.len() / 2],
        "shape_change_px": demo_shape_change(&projections),
        "placements": rows,
    });
    let series: Vec<svg::PolylineGroup> = offsets
        .iter()
        .zip(&projections)
        .enumerate()
        .map(|(i, (dx, k))| (format!("offset {dx} mm"), PALETTE[i % PALETTE.len()], finger_chains(k)))
        .collect();
    let mut out = OutputDir::create(&ctx.cfg.out_dir)?;
    out.write("demo.json", pretty(&summary).as_bytes())?;
    out.write(
        "demo.svg",
        svg::polylines("Same hand across the field of view, crops centered", &series).as_bytes(),
    )?;
    ctx.finish(out, "perspective-demo", None)?;
    print_json(&json!({"shape_change_px": summary["shape_change_px"], "placements": offsets.len()}));
    Ok(())
}

// ---------------------------------------------------------------------------
// render-silhouette / fit-silhouette

pub fn render_silhouette_cmd(mut ctx: Context, params: Option<&Path>, modal: bool) -> CliResult<()> {
    let s = ctx.cfg.silhouette.clone();
    let cam = ctx.camera(&s.camera, None)?;
    let model = ctx.model()?;
    let hp = ctx.pose(&s.pose, params, &model)?;
    let sigma = s.sigma.unwrap_or_else(|| default_sigma(cam.width(), cam.height()));
    let posed = model.forward_kinematics(&hp).tag("hand_model")?;
    let render = render_soft_silhouette(&posed.vertices, model.faces(), &cam, sigma).tag("softras")?;
    let mask = render.to_mask(0.5, s.amodal && !modal);
    let mut out = OutputDir::create(&ctx.cfg.out_dir)?;
    out.write("silhouette.pgm", &render.to_pgm())?;
    mask.save(&out.path("mask.pgm")).tag("softras")?;
    out.record_existing("mask.pgm")?;
    out.record_existing("mask.pgm.json")?;
    out.write("params.json", pretty(&hp).as_bytes())?;
    let summary = json!({
        "width": render.width(),
        "height": render.height(),
        "sigma": sigma,
        "coverage": render.occupancy().iter().sum::<f64>(),
        "mask_pixels": mask.count(),
        "amodal": mask.is_amodal(),
    });
    ctx.finish(out, "render-silhouette", None)?;
    print_json(&summary);
    Ok(())
}

pub struct FitOptions {
    pub target: PathBuf,
    pub init: Option<PathBuf>,
}

pub fn fit_silhouette_cmd(mut ctx: Context, opts: FitOptions) -> CliResult<()> {
    let s = ctx.cfg.silhouette.clone();
    let cam = ctx.camera(&s.camera, None)?;
    let model = ctx.model()?;
    let init = ctx.pose(&s.pose, opts.init.as_deref(), &model)?;
    read_input(&opts.target, &mut ctx.inputs)?;
    read_input(&MaskImage::sidecar_path(&opts.target), &mut ctx.inputs)?;
    let target = MaskImage::load(&opts.target).tag("softras")?;
    if (target.width(), target.height()) != (cam.width() as usize, cam.height() as usize) {
        return Err(CliError::validation(
            "softras",
            format!(
                "target mask is {}x{} but the render camera is {}x{}",
                target.width(),
                target.height(),
                cam.width(),
                cam.height()
            ),
        ));
    }
    let fit_cfg = FitConfig {
        sigma: s.sigma,
        translation_scale: s.translation_scale,
        min_relative_decrease: s.min_relative_decrease,
        ..FitConfig::new(s.steps, s.step_size)
    };
    let mut out = OutputDir::create(&ctx.cfg.out_dir)?;
    let result = match fit_pose_to_mask(&model, &init, &target, &cam, &fit_cfg) {
        Ok(r) => r,
        Err(Error::FitDiverged {
            steps,
            reason,
            last_valid,
        }) => {
            out.write("last_valid_params.json", pretty(&*last_valid).as_bytes())?;
            ctx.finish(out, "fit-silhouette", None)?;
            return Err(CliError::new(
                handcrop::ErrorKind::Numerical,
                "softras",
                format!("fit diverged after {steps} accepted steps: {reason}; last valid parameters written"),
            ));
        }
        Err(e) => return Err(e).tag("softras"),
    };
    let mut csv = String::from("step,loss\n");
    for (i, l) in result.loss_trace.iter().enumerate() {
        csv.push_str(&format!("{i},{l:.12e}\n"));
    }
    out.write("loss.csv", csv.as_bytes())?;
    out.write("fitted_params.json", pretty(&result.params).as_bytes())?;
    let summary = json!({
        "initial_loss": result.initial_loss(),
        "final_loss": result.final_loss(),
        "improvement": result.initial_loss() - result.final_loss(),
        "improved": result.final_loss() < result.initial_loss(),
        "accepted_steps": result.accepted_steps,
        "stop": result.stop,
        "root_trans": [result.params.root_trans.x, result.params.root_trans.y, result.params.root_trans.z],
    });
    out.write("summary.json", pretty(&summary).as_bytes())?;
    ctx.finish(out, "fit-silhouette", None)?;
    print_json(&summary);
    Ok(())
}

// ---------------------------------------------------------------------------
// grasp-train

pub fn grasp_train_cmd(mut ctx: Context, dataset: Option<&Path>) -> CliResult<()> {
    let g = ctx.cfg.grasp.clone();
    let seed = ctx.cfg.seed;
    let mut out = OutputDir::create(&ctx.cfg.out_dir)?;
    let data = match dataset.map(Path::to_path_buf).or(g.dataset.clone()) {
        Some(p) => {
            let text = read_input_string(&p, &mut ctx.inputs)?;
            GraspDataset::from_json(&text).tag("grasp")?
        }
        None => {
            let d = toy_grasp_dataset(g.per_class, g.spread, g.noise, seed);
            out.write("dataset.json", (d.to_json().tag("grasp")? + "\n").as_bytes())?;
            d
        }
    };
    let train_cfg = TrainConfig {
        epochs: g.epochs,
        lr: g.lr,
        seed: seed.wrapping_add(1),
        net: GraspConfig {
            hidden: g.hidden,
            extra_input: g.extra_input,
        },
        freeze_hidden: g.freeze_hidden,
    };
    let report = train_grasp_toy(&data, &train_cfg).tag("grasp")?;
    for w in &report.warnings {
        eprintln!("warning: grasp: {w}");
    }
    let mut csv = String::from("epoch,loss,accuracy\n");
    for (e, (l, a)) in report.loss.iter().zip(&report.accuracy).enumerate() {
        csv.push_str(&format!("{e},{l:.12e},{a:.6}\n"));
    }
    out.write("trace.csv", csv.as_bytes())?;
    out.write("net.json", (report.net.to_json().tag("grasp")? + "\n").as_bytes())?;
    let summary = json!({
        "samples": data.samples.len(),
        "classes": data.class_count(),
        "epochs": g.epochs,
        "final_loss": report.final_loss,
        "final_accuracy": report.final_accuracy,
        "warnings": report.warnings,
    });
    out.write("summary.json", pretty(&summary).as_bytes())?;
    ctx.finish(out, "grasp-train", Some(seed))?;
    print_json(&summary);
    Ok(())
}
