//! Perspective-n-point: normalized DLT initialization, projection onto the
//! nearest rotation, then Gauss-Newton refinement with Armijo backtracking.

use nalgebra::{DMatrix, Matrix3, Matrix3x4, Matrix4, SMatrix, Vector2, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::hand_model::{KeypointSet2D, KeypointSet3D};
use crate::rotation::{is_rotation, nearest_rotation, rodrigues, skew};

pub const MAX_ITERATIONS: usize = 100;
pub const STEP_TOLERANCE: f64 = 1e-10;
const ARMIJO_C: f64 = 1e-4;
const MIN_STEP_SCALE: f64 = 1e-12;
/// Ratio of the second-smallest to largest DLT singular value below which
/// the nullspace is not unique.
const RANK_TOLERANCE: f64 = 1e-8;

/// Rigid transform `x -> rotation * x + translation` (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseFile", into = "PoseFile")]
pub struct RigidPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

#[derive(Serialize, Deserialize)]
struct PoseFile {
    /// Row-major.
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

impl TryFrom<PoseFile> for RigidPose {
    type Error = Error;

    fn try_from(f: PoseFile) -> Result<Self> {
        let r = Matrix3::from_fn(|i, j| f.rotation[i][j]);
        if !is_rotation(&r, 1e-9) {
            return Err(Error::Parameter("pose rotation is not a proper rotation".into()));
        }
        Ok(RigidPose {
            rotation: r,
            translation: f.translation.into(),
        })
    }
}

impl From<RigidPose> for PoseFile {
    fn from(p: RigidPose) -> Self {
        PoseFile {
            rotation: std::array::from_fn(|i| std::array::from_fn(|j| p.rotation[(i, j)])),
            translation: p.translation.into(),
        }
    }
}

impl RigidPose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn apply(&self, k: &KeypointSet3D) -> KeypointSet3D {
        k.map(|p| self.apply_point(p))
    }

    pub fn is_proper(&self, tol: f64) -> bool {
        is_rotation(&self.rotation, tol)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PnpSolution {
    pub pose: RigidPose,
    /// Mean per-point reprojection error, px.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Half the sum of squared pixel residuals after each accepted step,
    /// starting with the initialization.
    pub objective_trace: Vec<f64>,
}

/// PnP result against a shifted copy of the reference keypoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftedAlignment {
    pub pose: RigidPose,
    pub shift: Vector2<f64>,
    pub residual: f64,
}

fn residuals(
    cam: &CameraIntrinsics,
    pose: &RigidPose,
    pts: &[Vector3<f64>],
    obs: &[Vector2<f64>],
) -> Option<Vec<Vector2<f64>>> {
    pts.iter()
        .zip(obs)
        .map(|(x, o)| {
            let p = pose.apply_point(x);
            (p.z > 0.0).then(|| Vector2::new(cam.fx() * p.x / p.z + cam.ppx(), cam.fy() * p.y / p.z + cam.ppy()) - o)
        })
        .collect()
}

fn half_sq(r: &[Vector2<f64>]) -> f64 {
    0.5 * r.iter().map(|e| e.norm_squared()).sum::<f64>()
}

fn mean_norm(r: &[Vector2<f64>]) -> f64 {
    r.iter().map(|e| e.norm()).sum::<f64>() / r.len() as f64
}

/// Normalized DLT estimate of the pose.
pub fn dlt_initialize(ref2d: &[Vector2<f64>], pts: &[Vector3<f64>], cam: &CameraIntrinsics) -> Result<RigidPose> {
    let n = pts.len();
    if n < 6 || ref2d.len() != n {
        return Err(Error::Degenerate(format!("need at least 6 correspondences, got {n}")));
    }

    let c3 = pts.iter().sum::<Vector3<f64>>() / n as f64;
    let d3 = pts.iter().map(|p| (p - c3).norm()).sum::<f64>() / n as f64;
    let norm_img: Vec<Vector2<f64>> = ref2d
        .iter()
        .map(|uv| Vector2::new((uv.x - cam.ppx()) / cam.fx(), (uv.y - cam.ppy()) / cam.fy()))
        .collect();
    let c2 = norm_img.iter().sum::<Vector2<f64>>() / n as f64;
    let d2 = norm_img.iter().map(|p| (p - c2).norm()).sum::<f64>() / n as f64;
    if !(d3 > 0.0) || !(d2 > 0.0) {
        return Err(Error::Degenerate("all correspondences coincide".into()));
    }
    let s3 = 3f64.sqrt() / d3;
    let s2 = 2f64.sqrt() / d2;

    let mut a = DMatrix::<f64>::zeros(2 * n, 12);
    for i in 0..n {
        let x = (pts[i] - c3) * s3;
        let m = (norm_img[i] - c2) * s2;
        let xh = [x.x, x.y, x.z, 1.0];
        for k in 0..4 {
            a[(2 * i, k)] = xh[k];
            a[(2 * i, 8 + k)] = -m.x * xh[k];
            a[(2 * i + 1, 4 + k)] = xh[k];
            a[(2 * i + 1, 8 + k)] = -m.y * xh[k];
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Degenerate("DLT decomposition failed".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let (smallest, second) = (order[0], order[1]);
    let largest = svd.singular_values[order[order.len() - 1]];
    if svd.singular_values[second] < RANK_TOLERANCE * largest {
        return Err(Error::Degenerate(
            "DLT system is rank deficient (coplanar or collinear points)".into(),
        ));
    }
    let p_norm = Matrix3x4::from_fn(|r, c| v_t[(smallest, 4 * r + c)]);

    let t3 = Matrix4::new(
        s3,
        0.0,
        0.0,
        -s3 * c3.x,
        0.0,
        s3,
        0.0,
        -s3 * c3.y,
        0.0,
        0.0,
        s3,
        -s3 * c3.z,
        0.0,
        0.0,
        0.0,
        1.0,
    );
    let t2_inv = Matrix3::new(1.0 / s2, 0.0, c2.x, 0.0, 1.0 / s2, c2.y, 0.0, 0.0, 1.0);
    let mut p = t2_inv * p_norm * t3;

    // The nullspace vector has arbitrary sign; pick the one that puts the
    // points in front of the camera.
    let depth_sum: f64 = pts.iter().map(|x| p.row(2).dot(&x.push(1.0).transpose())).sum();
    if depth_sum < 0.0 {
        p = -p;
    }
    let m = p.fixed_view::<3, 3>(0, 0).into_owned();
    let scale = m.singular_values().sum() / 3.0;
    if !(scale > 0.0) {
        return Err(Error::Degenerate("DLT projection block is singular".into()));
    }
    let rotation = nearest_rotation(&m);
    let mut pose = RigidPose {
        rotation,
        translation: p.column(3).into_owned() / scale,
    };
    if residuals(cam, &pose, pts, ref2d).is_none() {
        // Non-rigid correspondences can yield a reflected block; keep the
        // rotation and place the centroid by weak perspective instead.
        pose.translation = weak_perspective_translation(ref2d, pts, cam, &rotation);
    }
    Ok(pose)
}

fn weak_perspective_translation(
    ref2d: &[Vector2<f64>],
    pts: &[Vector3<f64>],
    cam: &CameraIntrinsics,
    rotation: &Matrix3<f64>,
) -> Vector3<f64> {
    let n = pts.len() as f64;
    let rotated: Vec<Vector3<f64>> = pts.iter().map(|x| rotation * x).collect();
    let c3 = rotated.iter().sum::<Vector3<f64>>() / n;
    let c2 = ref2d.iter().sum::<Vector2<f64>>() / n;
    let spread3: f64 = rotated.iter().map(|x| (x - c3).xy().norm()).sum::<f64>() / n;
    let spread2: f64 = ref2d
        .iter()
        .map(|uv| {
            let d = uv - c2;
            Vector2::new(d.x / cam.fx(), d.y / cam.fy()).norm()
        })
        .sum::<f64>()
        / n;
    let depth = if spread2 > 0.0 { spread3 / spread2 } else { 1.0 };
    let ray = cam.back_project(&c2, depth);
    ray - c3
}

/// Gauss-Newton on `(axis-angle increment, translation)` from `init`.
pub fn refine_pose(
    ref2d: &[Vector2<f64>],
    pts: &[Vector3<f64>],
    cam: &CameraIntrinsics,
    init: RigidPose,
) -> Result<PnpSolution> {
    let mut pose = init;
    let mut r = residuals(cam, &pose, pts, ref2d)
        .ok_or_else(|| Error::Infeasible("initial pose places points behind the camera".into()))?;
    let mut f = half_sq(&r);
    let mut trace = vec![f];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < MAX_ITERATIONS {
        if f == 0.0 {
            converged = true;
            break;
        }
        let mut jtj = SMatrix::<f64, 6, 6>::zeros();
        let mut g = Vector6::zeros();
        for (x, e) in pts.iter().zip(&r) {
            let p = pose.apply_point(x);
            let iz = 1.0 / p.z;
            let d_proj = SMatrix::<f64, 2, 3>::new(
                cam.fx() * iz,
                0.0,
                -cam.fx() * p.x * iz * iz,
                0.0,
                cam.fy() * iz,
                -cam.fy() * p.y * iz * iz,
            );
            let mut d_pose = SMatrix::<f64, 3, 6>::zeros();
            d_pose
                .fixed_view_mut::<3, 3>(0, 0)
                .copy_from(&(-skew(&(pose.rotation * x))));
            d_pose.fixed_view_mut::<3, 3>(0, 3).copy_from(&Matrix3::identity());
            let j = d_proj * d_pose;
            jtj += j.transpose() * j;
            g += j.transpose() * e;
        }
        let step = match jtj.cholesky() {
            Some(ch) => -ch.solve(&g),
            None => match jtj.try_inverse() {
                Some(inv) => -(inv * g),
                None => return Err(Error::Degenerate("Gauss-Newton normal matrix is singular".into())),
            },
        };
        let slope = g.dot(&step);

        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha >= MIN_STEP_SCALE {
            let d = step * alpha;
            let cand = RigidPose {
                rotation: rodrigues(&Vector3::new(d[0], d[1], d[2])) * pose.rotation,
                translation: pose.translation + Vector3::new(d[3], d[4], d[5]),
            };
            if let Some(rc) = residuals(cam, &cand, pts, ref2d) {
                let fc = half_sq(&rc);
                if fc <= f + ARMIJO_C * alpha * slope {
                    accepted = Some((cand, rc, fc, d.norm()));
                    break;
                }
            }
            alpha *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((cand, rc, fc, norm)) => {
                pose = cand;
                r = rc;
                f = fc;
                trace.push(f);
                if norm < STEP_TOLERANCE {
                    converged = true;
                    break;
                }
            }
            None => {
                // No descent left at machine precision.
                converged = true;
                break;
            }
        }
    }

    pose.rotation = nearest_rotation(&pose.rotation);
    let r = residuals(cam, &pose, pts, ref2d)
        .ok_or_else(|| Error::Infeasible("refined pose places points behind the camera".into()))?;
    debug_assert!(pose.is_proper(1e-9));
    Ok(PnpSolution {
        pose,
        residual: mean_norm(&r),
        iterations,
        converged,
        objective_trace: trace,
    })
}

/// Rigid pose that best aligns `hand3d` to the 2D keypoints `ref2d`.
pub fn pnp_align(ref2d: &KeypointSet2D, hand3d: &KeypointSet3D, cam: &CameraIntrinsics) -> Result<PnpSolution> {
    let obs = ref2d.points();
    let pts = hand3d.joints();
    let init = dlt_initialize(obs, pts, cam)?;
    if residuals(cam, &init, pts, obs).is_none() {
        return Err(Error::Infeasible(
            "linear solution places points behind the camera".into(),
        ));
    }
    refine_pose(obs, pts, cam, init)
}

/// [`pnp_align`] against `ref2d + shift`.
pub fn pnp_align_with_shift(
    ref2d: &KeypointSet2D,
    hand3d: &KeypointSet3D,
    cam: &CameraIntrinsics,
    shift: Vector2<f64>,
) -> Result<ShiftedAlignment> {
    let sol = pnp_align(&ref2d.shifted(&shift), hand3d, cam)?;
    Ok(ShiftedAlignment {
        pose: sol.pose,
        shift,
        residual: sol.residual,
    })
}
