//! Pinhole projection and the intrinsics-aware positional encoding of crops.
//!
//! The encoding turns a pixel into its two viewing-ray angles
//! `theta_x = atan((x - ppx) / fx)`, `theta_y = atan((y - ppy) / fy)` and
//! expands each angle as `sin(2^k theta), cos(2^k theta)` for `k = 0..4`.
//! Per point the 16 values are laid out as
//! `[x: (sin f0, cos f0), (sin f1, cos f1), .., y: (sin f0, cos f0), ..]`.
//!
//! The sparse variant encodes the crop center and its four corners. In
//! memory the corners come first, `(min,min), (max,min), (min,max), (max,max)`,
//! followed by the center, for 80 values total.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hand_model::{HandParams, KeypointSet2D, KeypointSet3D, SkinnedHandModel, NUM_JOINTS};
use crate::metrics::centered_2d_error;

/// Number of sinusoid frequencies per angle.
pub const KPE_FREQUENCIES: usize = 4;
/// Values per encoded point: two angles, each with sin and cos per frequency.
pub const KPE_PER_POINT: usize = 2 * 2 * KPE_FREQUENCIES;
/// Points in the sparse encoding.
pub const KPE_SPARSE_POINTS: usize = 5;
/// Offset of the center block in the sparse encoding.
pub const KPE_CENTER_OFFSET: usize = 4 * KPE_PER_POINT;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIntrinsics", into = "RawIntrinsics")]
pub struct CameraIntrinsics {
    fx: f64,
    fy: f64,
    ppx: f64,
    ppy: f64,
    width: u32,
    height: u32,
}

#[derive(Serialize, Deserialize)]
struct RawIntrinsics {
    fx: f64,
    fy: f64,
    ppx: f64,
    ppy: f64,
    width: u32,
    height: u32,
}

impl TryFrom<RawIntrinsics> for CameraIntrinsics {
    type Error = Error;

    fn try_from(r: RawIntrinsics) -> Result<Self> {
        CameraIntrinsics::new(r.fx, r.fy, r.ppx, r.ppy, r.width, r.height)
    }
}

impl From<CameraIntrinsics> for RawIntrinsics {
    fn from(c: CameraIntrinsics) -> Self {
        RawIntrinsics {
            fx: c.fx,
            fy: c.fy,
            ppx: c.ppx,
            ppy: c.ppy,
            width: c.width,
            height: c.height,
        }
    }
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, ppx: f64, ppy: f64, width: u32, height: u32) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) || !fx.is_finite() || !fy.is_finite() {
            return Err(Error::Parameter(format!(
                "focal lengths must be positive, got ({fx}, {fy})"
            )));
        }
        if !ppx.is_finite() || !ppy.is_finite() {
            return Err(Error::Parameter("principal point must be finite".into()));
        }
        if width == 0 || height == 0 {
            return Err(Error::Parameter(format!(
                "image size must be positive, got {width}x{height}"
            )));
        }
        Ok(Self {
            fx,
            fy,
            ppx,
            ppy,
            width,
            height,
        })
    }

    /// Square-pixel camera with the principal point at the image center and
    /// the given horizontal field of view in degrees.
    pub fn from_horizontal_fov(width: u32, height: u32, fov_deg: f64) -> Result<Self> {
        if !(fov_deg > 0.0 && fov_deg < 180.0) {
            return Err(Error::Parameter(format!("field of view {fov_deg} out of (0, 180)")));
        }
        let f = 0.5 * width as f64 / (0.5 * fov_deg.to_radians()).tan();
        Self::new(f, f, 0.5 * width as f64, 0.5 * height as f64, width, height)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn fx(&self) -> f64 {
        self.fx
    }
    pub fn fy(&self) -> f64 {
        self.fy
    }
    pub fn ppx(&self) -> f64 {
        self.ppx
    }
    pub fn ppy(&self) -> f64 {
        self.ppy
    }
    pub fn principal_point(&self) -> Vector2<f64> {
        Vector2::new(self.ppx, self.ppy)
    }
    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }

    /// Projects a single point; `index` only labels the error.
    pub fn project_point(&self, p: &Vector3<f64>, index: usize) -> Result<Vector2<f64>> {
        if !(p.z > 0.0) {
            return Err(Error::BehindCamera { index, z: p.z });
        }
        Ok(Vector2::new(
            self.fx * p.x / p.z + self.ppx,
            self.fy * p.y / p.z + self.ppy,
        ))
    }

    /// Point on the ray through pixel `(u, v)` at depth `z`.
    pub fn back_project(&self, uv: &Vector2<f64>, z: f64) -> Vector3<f64> {
        Vector3::new((uv.x - self.ppx) / self.fx * z, (uv.y - self.ppy) / self.fy * z, z)
    }

    /// Viewing-ray angles of a pixel, in radians.
    pub fn pixel_angles(&self, x: f64, y: f64) -> (f64, f64) {
        (((x - self.ppx) / self.fx).atan(), ((y - self.ppy) / self.fy).atan())
    }
}

/// Pinhole projection of every joint.
pub fn project(cam: &CameraIntrinsics, pts: &KeypointSet3D) -> Result<KeypointSet2D> {
    let mut out = [Vector2::zeros(); NUM_JOINTS];
    for (i, p) in pts.joints().iter().enumerate() {
        out[i] = cam.project_point(p, i)?;
    }
    KeypointSet2D::new(out)
}

/// Lifts each pixel back to 3D using the matching depth of `depths`.
pub fn back_project(cam: &CameraIntrinsics, pts: &KeypointSet2D, depths: &[f64; NUM_JOINTS]) -> Result<KeypointSet3D> {
    KeypointSet3D::new(std::array::from_fn(|i| cam.back_project(&pts.points()[i], depths[i])))
}

/// Crop rectangle in image pixels. May extend past the image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct CropBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl CropBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let finite = [x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite());
        if !finite || !(x_min < x_max) || !(y_min < y_max) {
            return Err(Error::Parameter(format!(
                "crop box [{x_min}, {y_min}, {x_max}, {y_max}] must have min < max"
            )));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    /// Box of the given size centered at `(cx, cy)`.
    pub fn centered(cx: f64, cy: f64, width: f64, height: f64) -> Result<Self> {
        Self::new(cx - 0.5 * width, cy - 0.5 * height, cx + 0.5 * width, cy + 0.5 * height)
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    /// Corners in encoding order, then the center.
    pub fn encoding_points(&self) -> [(f64, f64); KPE_SPARSE_POINTS] {
        [
            (self.x_min, self.y_min),
            (self.x_max, self.y_min),
            (self.x_min, self.y_max),
            (self.x_max, self.y_max),
            self.center(),
        ]
    }
}

impl TryFrom<[f64; 4]> for CropBox {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        CropBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<CropBox> for [f64; 4] {
    fn from(b: CropBox) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

/// Flat encoding vector, values in [-1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KpeEncoding {
    pub values: Vec<f64>,
}

impl KpeEncoding {
    /// Encoding of the `i`-th point.
    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * KPE_PER_POINT..(i + 1) * KPE_PER_POINT]
    }
}

fn encode_angle(theta: f64, out: &mut Vec<f64>) {
    let mut freq = 1.0;
    for _ in 0..KPE_FREQUENCIES {
        let (s, c) = (freq * theta).sin_cos();
        out.push(s);
        out.push(c);
        freq *= 2.0;
    }
}

/// Encoding of a single pixel.
pub fn encode_pixel(cam: &CameraIntrinsics, x: f64, y: f64) -> [f64; KPE_PER_POINT] {
    let (tx, ty) = cam.pixel_angles(x, y);
    let mut v = Vec::with_capacity(KPE_PER_POINT);
    encode_angle(tx, &mut v);
    encode_angle(ty, &mut v);
    v.try_into().expect("fixed width")
}

/// Encodes the four corners and the center of a crop (80 values).
pub fn kpe_sparse(cam: &CameraIntrinsics, crop: &CropBox) -> KpeEncoding {
    let values = crop
        .encoding_points()
        .iter()
        .flat_map(|&(x, y)| encode_pixel(cam, x, y))
        .collect();
    KpeEncoding { values }
}

/// Per-cell encoding over a `grid x grid` partition of the crop, sampled at
/// cell centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpeDenseMap {
    pub grid: usize,
    /// Row-major cells.
    pub cells: Vec<KpeEncoding>,
}

impl KpeDenseMap {
    pub fn cell(&self, row: usize, col: usize) -> &KpeEncoding {
        &self.cells[row * self.grid + col]
    }

    /// CSV with one line per cell: `row,col,v0..v15`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("row,col");
        for axis in ["x", "y"] {
            for k in 0..KPE_FREQUENCIES {
                s.push_str(&format!(",sin{k}_{axis},cos{k}_{axis}"));
            }
        }
        s.push('\n');
        for r in 0..self.grid {
            for c in 0..self.grid {
                s.push_str(&format!("{r},{c}"));
                for v in &self.cell(r, c).values {
                    s.push_str(&format!(",{v:.17e}"));
                }
                s.push('\n');
            }
        }
        s
    }
}

pub fn kpe_dense(cam: &CameraIntrinsics, crop: &CropBox, grid: usize) -> Result<KpeDenseMap> {
    if grid == 0 {
        return Err(Error::Parameter("dense grid must have at least one cell".into()));
    }
    let (sx, sy) = (crop.width() / grid as f64, crop.height() / grid as f64);
    let mut cells = Vec::with_capacity(grid * grid);
    for r in 0..grid {
        for c in 0..grid {
            let x = crop.x_min + (c as f64 + 0.5) * sx;
            let y = crop.y_min + (r as f64 + 0.5) * sy;
            cells.push(KpeEncoding {
                values: encode_pixel(cam, x, y).to_vec(),
            });
        }
    }
    Ok(KpeDenseMap { grid, cells })
}

/// Projects the same hand translated laterally (along camera x) by each
/// offset in mm.
pub fn perspective_demo(
    cam: &CameraIntrinsics,
    model: &SkinnedHandModel,
    params: &HandParams,
    offsets: &[f64],
) -> Result<Vec<KeypointSet2D>> {
    offsets
        .iter()
        .map(|dx| {
            let mut p = params.clone();
            p.root_trans.x += dx;
            let posed = model.forward_kinematics(&p)?;
            project(cam, &posed.joints)
        })
        .collect()
}

/// Centered 2D error between the first and last projection of a demo.
pub fn demo_shape_change(projections: &[KeypointSet2D]) -> f64 {
    match (projections.first(), projections.last()) {
        (Some(a), Some(b)) => centered_2d_error(a, b),
        _ => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 520.0, 320.0, 240.0, 640, 480).unwrap()
    }

    #[test]
    fn optical_axis_and_unit_tangent() {
        let c = cam();
        let uv = c.project_point(&Vector3::new(0.0, 0.0, 500.0), 0).unwrap();
        assert_eq!(uv, Vector2::new(320.0, 240.0));
        let uv = c.project_point(&Vector3::new(700.0, 0.0, 700.0), 0).unwrap();
        assert_eq!(uv.x, 320.0 + 500.0);
        assert_eq!(c.pixel_angles(320.0, 240.0), (0.0, 0.0));
        assert!((c.pixel_angles(820.0, 0.0).0 - FRAC_PI_4).abs() < 1e-12);
        let x = 320.0 - 500.0 * 0.3f64.tan();
        assert!((c.pixel_angles(x, 240.0).0 + 0.3).abs() < 1e-12);
    }

    #[test]
    fn behind_camera_reports_joint() {
        let mut j = [Vector3::new(0.0, 0.0, 100.0); 21];
        j[13].z = -1.0;
        let err = project(&cam(), &KeypointSet3D::new(j).unwrap()).unwrap_err();
        assert!(matches!(err, Error::BehindCamera { index: 13, .. }));
        j[13].z = 0.0;
        assert!(project(&cam(), &KeypointSet3D::new(j).unwrap()).is_err());
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 0.0, 0.0, 10, 10).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, 0, 10).is_err());
        let s = r#"{"fx":-1,"fy":1,"ppx":0,"ppy":0,"width":4,"height":4}"#;
        assert!(CameraIntrinsics::from_json(s).is_err());
        let s = serde_json::to_string(&cam()).unwrap();
        assert_eq!(
            s,
            r#"{"fx":500.0,"fy":520.0,"ppx":320.0,"ppy":240.0,"width":640,"height":480}"#
        );
    }

    #[test]
    fn fov_constructor() {
        let c = CameraIntrinsics::from_horizontal_fov(640, 480, 60.0).unwrap();
        assert!((c.pixel_angles(640.0, 240.0).0 - 30f64.to_radians()).abs() < 1e-12);
    }

    #[test]
    fn centered_box_center_block() {
        let c = cam();
        let b = CropBox::centered(320.0, 240.0, 100.0, 80.0).unwrap();
        let e = kpe_sparse(&c, &b);
        assert_eq!(e.values.len(), 80);
        assert_eq!(
            e.point(4),
            &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]
        );
        assert_eq!(kpe_sparse(&c, &b), e);
    }

    #[test]
    fn crop_box_validation() {
        assert!(CropBox::new(10.0, 0.0, 10.0, 5.0).is_err());
        assert!(CropBox::new(0.0, 5.0, 10.0, 1.0).is_err());
        assert!(CropBox::new(-50.0, -50.0, 10.0, 10.0).is_ok());
        assert!(kpe_dense(&cam(), &CropBox::new(0.0, 0.0, 1.0, 1.0).unwrap(), 0).is_err());
    }

    #[test]
    fn dense_csv_shape() {
        let m = kpe_dense(&cam(), &CropBox::new(0.0, 0.0, 64.0, 64.0).unwrap(), 3).unwrap();
        let csv = m.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 10);
        assert_eq!(lines[0].split(',').count(), 18);
        assert!(lines[5].starts_with("1,1,"));
    }
}
