// Validation uses `!(x > 0.0)` style tests on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;
mod svg;

use std::path::PathBuf;

use clap::error::ErrorKind as ClapErrorKind;
use clap::{Args, Parser, Subcommand};
use handcrop::alignment::{RootAlignment, ScanMode};

use commands::{Context, FitOptions, KpeKind, ScanOptions, YMetric};
use config::ExperimentConfig;
use error::{CliError, CliResult};

/// Crop-based hand pose toolkit: kinematics, crop encodings, the crop
/// ambiguity scan, soft silhouettes and grasp supervision.
#[derive(Debug, Parser)]
#[command(name = "handcrop", version)]
struct Cli {
    /// JSON experiment configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Hand model JSON; the built-in procedural hand when absent.
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Worker threads. Outputs do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Distances between a reference hand and a synthetic population.
    AmbiguityScan(ScanArgs),
    /// Intrinsics-aware encoding of a crop box, printed as JSON.
    Kpe(KpeArgs),
    /// Project hand keypoints into the image.
    Project(ProjectArgs),
    /// MPJPE, root-relative, MRRPE and reprojection errors.
    Metrics(MetricsArgs),
    /// Rigid alignment of 3D keypoints to 2D keypoints.
    Pnp(PnpArgs),
    /// The same hand at several horizontal offsets, crops centered.
    PerspectiveDemo(DemoArgs),
    /// Soft silhouette and binary mask of a posed hand.
    RenderSilhouette(RenderArgs),
    /// Fit the hand pose to a binary mask.
    FitSilhouette(FitArgs),
    /// Train the grasp classifier on a toy or supplied dataset.
    GraspTrain(GraspArgs),
}

#[derive(Debug, Args)]
struct ScanArgs {
    /// Alignment mode; repeat for several. Defaults to the configured modes.
    #[arg(long, value_parser = parse_mode)]
    mode: Vec<ScanMode>,
    /// Fail unless far crops reach a larger 3D error than near crops.
    #[arg(long)]
    check: bool,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    intrinsics: Option<PathBuf>,
    /// Near bucket: crop distance below this, px.
    #[arg(long)]
    near_px: Option<f64>,
    /// Far bucket: crop distance above this, px.
    #[arg(long)]
    far_px: Option<f64>,
    /// Matched 2D error filter for the check, px.
    #[arg(long)]
    max_centered_2d: Option<f64>,
    #[arg(long, value_parser = parse_root_alignment)]
    root_alignment: Option<RootAlignment>,
    /// 3D error on the scatter's y axis.
    #[arg(long, value_enum, default_value = "rootrel")]
    y_metric: YMetric,
}

#[derive(Debug, Args)]
struct KpeArgs {
    #[arg(long)]
    intrinsics: PathBuf,
    /// Crop box as x_min,y_min,x_max,y_max in pixels.
    #[arg(long = "box", value_delimiter = ',', allow_hyphen_values = true, required = true)]
    crop: Vec<f64>,
    #[arg(long, value_enum, default_value = "sparse")]
    encoding: KpeKind,
    /// Cells per side for the dense encoding.
    #[arg(long, default_value_t = 8)]
    grid: usize,
    /// Also write the dense map as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ProjectArgs {
    #[arg(long)]
    intrinsics: Option<PathBuf>,
    /// Hand parameters JSON, posed with the hand model.
    #[arg(long)]
    params: Option<PathBuf>,
    /// 21 camera-space keypoints JSON.
    #[arg(long)]
    points: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Enables the 2D metrics.
    #[arg(long)]
    intrinsics: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PnpArgs {
    #[arg(long)]
    intrinsics: PathBuf,
    #[arg(long)]
    ref2d: PathBuf,
    #[arg(long)]
    hand3d: PathBuf,
    /// Fixed 2D shift dx,dy applied to the reference keypoints.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    shift: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct DemoArgs {
    #[arg(long)]
    params: Option<PathBuf>,
    /// Horizontal offsets in mm, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    offsets: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Mark the mask as modal (fitting will refuse it).
    #[arg(long)]
    modal: bool,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Target mask PGM with its JSON sidecar.
    #[arg(long)]
    target: PathBuf,
    /// Initial hand parameters JSON.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Stop when an accepted step lowers the loss by less than this
    /// fraction.
    #[arg(long)]
    min_relative_decrease: Option<f64>,
}

#[derive(Debug, Args)]
struct GraspArgs {
    /// Dataset JSON of theta/label samples; a seeded toy set otherwise.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Train only the output layer.
    #[arg(long)]
    freeze_hidden: bool,
}

fn parse_mode(s: &str) -> Result<ScanMode, String> {
    s.parse().map_err(|e: handcrop::Error| e.to_string())
}

fn parse_root_alignment(s: &str) -> Result<RootAlignment, String> {
    s.parse().map_err(|e: handcrop::Error| e.to_string())
}

fn load_config(cli: &Cli, ctx_inputs: &mut Vec<output::FileEntry>) -> CliResult<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p, ctx_inputs)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    if let Some(m) = &cli.model {
        cfg.model = Some(m.clone());
    }
    match &cli.command {
        Command::AmbiguityScan(a) => {
            let s = &mut cfg.scan;
            if let Some(v) = a.population {
                s.population_size = v;
            }
            if let Some(v) = &a.intrinsics {
                s.camera.intrinsics = Some(v.clone());
            }
            if let Some(v) = a.near_px {
                s.near_px = v;
            }
            if let Some(v) = a.far_px {
                s.far_px = v;
            }
            if let Some(v) = a.max_centered_2d {
                s.max_centered_2d_px = v;
            }
            if let Some(v) = a.root_alignment {
                s.root_alignment = v;
            }
        }
        Command::RenderSilhouette(a) => {
            if a.sigma.is_some() {
                cfg.silhouette.sigma = a.sigma;
            }
        }
        Command::FitSilhouette(a) => {
            let s = &mut cfg.silhouette;
            if let Some(v) = a.steps {
                s.steps = v;
            }
            if let Some(v) = a.step_size {
                s.step_size = v;
            }
            if a.sigma.is_some() {
                s.sigma = a.sigma;
            }
            if let Some(v) = a.min_relative_decrease {
                s.min_relative_decrease = v;
            }
        }
        Command::GraspTrain(a) => {
            let g = &mut cfg.grasp;
            if let Some(v) = a.epochs {
                g.epochs = v;
            }
            if let Some(v) = a.lr {
                g.lr = v;
            }
            g.freeze_hidden |= a.freeze_hidden;
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::validation("cli", "--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::validation("cli", e.to_string()))?;
    }
    let mut inputs = Vec::new();
    let cfg = load_config(&cli, &mut inputs)?;
    let ctx = Context { cfg, inputs };
    match &cli.command {
        Command::AmbiguityScan(a) => commands::ambiguity_scan_cmd(
            ctx,
            ScanOptions {
                modes: a.mode.clone(),
                check: a.check,
                y_metric: a.y_metric,
            },
        ),
        Command::Kpe(a) => commands::kpe_cmd(ctx, &a.intrinsics, &a.crop, a.encoding, a.grid, a.csv.as_deref()),
        Command::Project(a) => {
            commands::project_cmd(ctx, a.intrinsics.as_deref(), a.params.as_deref(), a.points.as_deref())
        }
        Command::Metrics(a) => commands::metrics_cmd(ctx, &a.pred, &a.gt, a.intrinsics.as_deref()),
        Command::Pnp(a) => commands::pnp_cmd(ctx, &a.intrinsics, &a.ref2d, &a.hand3d, a.shift.as_deref()),
        Command::PerspectiveDemo(a) => commands::perspective_demo_cmd(ctx, a.params.as_deref(), a.offsets.as_deref()),
        Command::RenderSilhouette(a) => commands::render_silhouette_cmd(ctx, a.params.as_deref(), a.modal),
        Command::FitSilhouette(a) => commands::fit_silhouette_cmd(
            ctx,
            FitOptions {
                target: a.target.clone(),
                init: a.init.clone(),
            },
        ),
        Command::GraspTrain(a) => commands::grasp_train_cmd(ctx, a.dataset.as_deref()),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => match e.kind() {
            ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion => {
                print!("{e}");
                std::process::exit(0);
            }
            _ => {
                let msg = e.to_string();
                let first = msg
                    .lines()
                    .next()
                    .unwrap_or("invalid arguments")
                    .trim_start_matches("error: ");
                eprintln!("{}", CliError::validation("cli", first).to_json());
                std::process::exit(1);
            }
        },
    };
    if let Err(e) = run(cli) {
        eprintln!("{}", e.to_json());
        std::process::exit(e.exit_code());
    }
}
