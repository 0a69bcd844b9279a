use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mask::MaskImage;
use super::raster::{default_sigma, render_soft_silhouette, silhouette_l1_loss, silhouette_loss_grad_vertices};
use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::hand_model::{HandParams, SkinnedHandModel};

/// Pose vector layout: root translation (3), root rotation (3), theta (45).
const POSE_DIM: usize = 51;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub steps: usize,
    /// Initial step along the scaled negative gradient. The step doubles
    /// after each accepted step and halves while backtracking.
    pub step_size: f64,
    /// Rendering sharpness in px²; `None` uses the image-size default.
    pub sigma: Option<f64>,
    /// Translation is optimized as `translation / translation_scale`, so a
    /// gradient step moves it `translation_scale²` times further than a
    /// rotation component with the same raw gradient. This compensates for
    /// a millimetre moving the silhouette far less than a radian does.
    pub translation_scale: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    /// Halvings tried before giving up on a step.
    pub max_backtracks: usize,
    /// A step must lower the loss by this fraction to count as progress;
    /// smaller gains are treated as pixel-discretization noise and end the
    /// fit without being applied.
    pub min_relative_decrease: f64,
    /// Central-difference step for the kinematic Jacobian.
    pub jacobian_step: f64,
}

impl FitConfig {
    pub fn new(steps: usize, step_size: f64) -> Self {
        Self {
            steps,
            step_size,
            sigma: None,
            translation_scale: 100.0,
            armijo: 1e-4,
            max_backtracks: 40,
            min_relative_decrease: 0.0,
            jacobian_step: 1e-6,
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !(self.step_size >= 0.0 && self.step_size.is_finite()) {
            return Err(Error::Parameter(format!(
                "step size must be non-negative, got {}",
                self.step_size
            )));
        }
        if !(self.min_relative_decrease >= 0.0 && self.min_relative_decrease < 1.0) {
            return Err(Error::Parameter("minimum relative decrease must lie in [0, 1)".into()));
        }
        if !positive(self.translation_scale)
            || !positive(self.jacobian_step)
            || !(self.armijo > 0.0 && self.armijo < 1.0)
        {
            return Err(Error::Parameter("invalid fit scaling or line-search constants".into()));
        }
        if let Some(s) = self.sigma {
            if !positive(s) {
                return Err(Error::Parameter(format!("sigma must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStop {
    /// The step budget ran out.
    Steps,
    /// No step along the descent direction decreased the loss enough.
    NoDescent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: HandParams,
    /// Loss before fitting followed by the loss after each accepted step.
    pub loss_trace: Vec<f64>,
    pub accepted_steps: usize,
    pub stop: FitStop,
}

impl FitResult {
    pub fn initial_loss(&self) -> f64 {
        self.loss_trace[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.loss_trace.last().expect("trace holds the initial loss")
    }
}

/// Per-component step multipliers implied by the variable scaling.
fn step_scales(cfg: &FitConfig) -> [f64; POSE_DIM] {
    std::array::from_fn(|k| if k < 3 { cfg.translation_scale.powi(2) } else { 1.0 })
}

/// Loss and its gradient with respect to the pose vector. The vertex
/// gradient is analytic; the kinematic Jacobian uses central differences.
fn loss_and_pose_grad(
    model: &SkinnedHandModel,
    params: &HandParams,
    target: &MaskImage,
    cam: &CameraIntrinsics,
    sigma: f64,
    h: f64,
) -> Result<(f64, [f64; POSE_DIM])> {
    let posed = model.forward_kinematics(params)?;
    let sg = silhouette_loss_grad_vertices(&posed.vertices, model.faces(), cam, sigma, target)?;
    let base = params.pose_vector();
    let cols: Vec<f64> = (0..POSE_DIM)
        .into_par_iter()
        .map(|k| {
            let mut plus = base.clone();
            let mut minus = base.clone();
            plus[k] += h;
            minus[k] -= h;
            let vp = model.forward_kinematics(&params.with_pose_vector(&plus))?.vertices;
            let vm = model.forward_kinematics(&params.with_pose_vector(&minus))?.vertices;
            Ok(vp
                .iter()
                .zip(&vm)
                .zip(&sg.vertices)
                .map(|((p, m), g)| g.dot(&(p - m)))
                .sum::<f64>()
                / (2.0 * h))
        })
        .collect::<Result<_>>()?;
    let mut grad = [0.0; POSE_DIM];
    grad.copy_from_slice(&cols);
    Ok((sg.loss, grad))
}

fn loss_at(
    model: &SkinnedHandModel,
    params: &HandParams,
    target: &MaskImage,
    cam: &CameraIntrinsics,
    sigma: f64,
) -> Result<(f64, f64)> {
    let posed = model.forward_kinematics(params)?;
    let render = render_soft_silhouette(&posed.vertices, model.faces(), cam, sigma)?;
    let coverage = render.occupancy().iter().sum::<f64>();
    Ok((silhouette_l1_loss(&render, target)?.value, coverage))
}

/// Gradient descent with Armijo backtracking on the L1 silhouette loss over
/// root translation, root rotation and articulation. Shape is held fixed.
pub fn fit_pose_to_mask(
    model: &SkinnedHandModel,
    init: &HandParams,
    target: &MaskImage,
    cam: &CameraIntrinsics,
    cfg: &FitConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    let sigma = cfg.sigma.unwrap_or_else(|| default_sigma(cam.width(), cam.height()));
    let scales = step_scales(cfg);
    let mut params = init.clone();
    let (mut loss, _) = loss_at(model, &params, target, cam, sigma)?;
    let mut trace = vec![loss];
    let mut stop = FitStop::Steps;
    let mut alpha = cfg.step_size;

    for step in 0..cfg.steps {
        let (_, grad) = loss_and_pose_grad(model, &params, target, cam, sigma, cfg.jacobian_step)?;
        let decrease: f64 = grad.iter().zip(&scales).map(|(g, s)| s * g * g).sum();
        if !(decrease > 0.0) {
            stop = FitStop::NoDescent;
            break;
        }
        let base = params.pose_vector();
        let mut accepted = None;
        let mut render_failures = 0;
        for _ in 0..=cfg.max_backtracks {
            let trial: Vec<f64> = (0..POSE_DIM).map(|k| base[k] - alpha * scales[k] * grad[k]).collect();
            let candidate = params.with_pose_vector(&trial);
            match loss_at(model, &candidate, target, cam, sigma) {
                Ok((l, coverage)) => {
                    if l <= loss - cfg.armijo * alpha * decrease {
                        if !(coverage > 0.0) {
                            return Err(Error::FitDiverged {
                                steps: step,
                                reason: "the hand left the image".into(),
                                last_valid: Box::new(params),
                            });
                        }
                        accepted = Some((candidate, l));
                        break;
                    }
                }
                Err(Error::BehindCamera { .. }) => render_failures += 1,
                Err(e) => return Err(e),
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((_, l)) if loss - l < cfg.min_relative_decrease * loss => {
                stop = FitStop::NoDescent;
                break;
            }
            Some((p, l)) => {
                alpha *= 2.0;
                params = p;
                loss = l;
                trace.push(l);
            }
            None if render_failures > cfg.max_backtracks => {
                return Err(Error::FitDiverged {
                    steps: step,
                    reason: "every trial step moved the hand behind the camera".into(),
                    last_valid: Box::new(params),
                });
            }
            None => {
                stop = FitStop::NoDescent;
                break;
            }
        }
    }

    Ok(FitResult {
        params,
        accepted_steps: trace.len() - 1,
        loss_trace: trace,
        stop,
    })
}
