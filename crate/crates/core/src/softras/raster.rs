use nalgebra::{Vector2, Vector3};
use rayon::prelude::*;

use super::mask::MaskImage;
use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};

/// Rows per parallel work unit. Partial gradient sums are formed per band
/// and added in band order, so results do not depend on the thread count.
const BAND_ROWS: usize = 8;

/// Default sharpness: 1e-4 of the squared image diagonal, in px².
pub fn default_sigma(width: u32, height: u32) -> f64 {
    1e-4 * ((width as f64).powi(2) + (height as f64).powi(2))
}

/// Faces farther than this from a pixel (by screen bound) are skipped.
/// At this distance a face contributes logistic(-36), below f64 resolution
/// next to 1, so the cutoff adds no visible jumps to the loss.
pub fn cutoff_band(sigma: f64) -> f64 {
    6.0 * sigma.sqrt()
}

/// Soft occupancy image at the camera's resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftSilhouette {
    width: usize,
    height: usize,
    sigma: f64,
    occupancy: Vec<f64>,
}

impl SoftSilhouette {
    /// Wraps row-major occupancy values, which must lie in [0, 1].
    pub fn from_occupancy(width: usize, height: usize, sigma: f64, occupancy: Vec<f64>) -> Result<Self> {
        if occupancy.len() != width * height {
            return Err(Error::Dimension {
                what: "occupancy pixels",
                expected: width * height,
                actual: occupancy.len(),
            });
        }
        if !(sigma > 0.0) || occupancy.iter().any(|o| !(0.0..=1.0).contains(o)) {
            return Err(Error::Parameter(
                "occupancy must lie in [0, 1] and sigma be positive".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            sigma,
            occupancy,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Row-major occupancy in [0, 1].
    pub fn occupancy(&self) -> &[f64] {
        &self.occupancy
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.occupancy[row * self.width + col]
    }

    /// Pixels with occupancy above `threshold` are set.
    pub fn to_mask(&self, threshold: f64, amodal: bool) -> MaskImage {
        let data = self.occupancy.iter().map(|&o| (o > threshold) as u8).collect();
        MaskImage::new(self.width, self.height, data, amodal).expect("dimensions match by construction")
    }

    /// 8-bit grayscale PGM of the occupancy.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.occupancy.iter().map(|&o| (o * 255.0).round() as u8));
        out
    }
}

#[derive(Debug, Clone, Copy)]
struct ScreenFace {
    v: [Vector2<f64>; 3],
    idx: [usize; 3],
    lo: Vector2<f64>,
    hi: Vector2<f64>,
}

impl ScreenFace {
    fn covers(&self, p: &Vector2<f64>, band: f64) -> bool {
        p.x >= self.lo.x - band && p.x <= self.hi.x + band && p.y >= self.lo.y - band && p.y <= self.hi.y + band
    }

    fn covers_row(&self, y: f64, band: f64) -> bool {
        y >= self.lo.y - band && y <= self.hi.y + band
    }
}

/// Projected geometry shared by the forward and backward passes.
struct Scene {
    width: usize,
    height: usize,
    sigma: f64,
    band: f64,
    screen: Vec<Vector2<f64>>,
    faces: Vec<ScreenFace>,
}

impl Scene {
    fn new(vertices: &[Vector3<f64>], faces: &[[usize; 3]], cam: &CameraIntrinsics, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Parameter(format!(
                "sigma must be positive and finite, got {sigma}"
            )));
        }
        let screen = vertices
            .iter()
            .enumerate()
            .map(|(i, v)| cam.project_point(v, i))
            .collect::<Result<Vec<_>>>()?;
        let faces = faces
            .iter()
            .map(|f| {
                if let Some(&bad) = f.iter().find(|&&i| i >= screen.len()) {
                    return Err(Error::Parameter(format!(
                        "face references vertex {bad} of {}",
                        screen.len()
                    )));
                }
                let v = [screen[f[0]], screen[f[1]], screen[f[2]]];
                Ok(ScreenFace {
                    v,
                    idx: *f,
                    lo: v[0].inf(&v[1]).inf(&v[2]),
                    hi: v[0].sup(&v[1]).sup(&v[2]),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            width: cam.width() as usize,
            height: cam.height() as usize,
            sigma,
            band: cutoff_band(sigma),
            screen,
            faces,
        })
    }

    fn pixel_center(row: usize, col: usize) -> Vector2<f64> {
        Vector2::new(col as f64 + 0.5, row as f64 + 0.5)
    }

    fn row_faces(&self, row: usize) -> Vec<&ScreenFace> {
        let y = row as f64 + 0.5;
        self.faces.iter().filter(|f| f.covers_row(y, self.band)).collect()
    }

    fn render_row(&self, row: usize, out: &mut [f64]) {
        let faces = self.row_faces(row);
        for (col, o) in out.iter_mut().enumerate() {
            let p = Self::pixel_center(row, col);
            let mut empty = 1.0;
            for f in faces.iter().filter(|f| f.covers(&p, self.band)) {
                let (d, _) = signed_distance(&p, &f.v);
                empty *= logistic(-d * d.abs() / self.sigma);
            }
            *o = 1.0 - empty;
        }
    }

    fn render(&self) -> SoftSilhouette {
        let mut occupancy = vec![0.0; self.width * self.height];
        occupancy
            .par_chunks_mut(self.width)
            .enumerate()
            .for_each(|(row, out)| self.render_row(row, out));
        SoftSilhouette {
            width: self.width,
            height: self.height,
            sigma: self.sigma,
            occupancy,
        }
    }

    /// Screen-space gradient of `Σ_i g_i·O_i` with respect to each projected
    /// vertex.
    fn backward(&self, render: &SoftSilhouette, pixel_grad: &[f64]) -> Vec<Vector2<f64>> {
        let n = self.screen.len();
        let bands: Vec<Vec<Vector2<f64>>> = (0..self.height.div_ceil(BAND_ROWS))
            .into_par_iter()
            .map(|band| {
                let mut acc = vec![Vector2::zeros(); n];
                let rows = band * BAND_ROWS..((band + 1) * BAND_ROWS).min(self.height);
                for row in rows {
                    let faces = self.row_faces(row);
                    for col in 0..self.width {
                        let g = pixel_grad[row * self.width + col];
                        if g == 0.0 {
                            continue;
                        }
                        let p = Self::pixel_center(row, col);
                        let empty = 1.0 - render.get(row, col);
                        for f in faces.iter().filter(|f| f.covers(&p, self.band)) {
                            let (d, dd) = signed_distance(&p, &f.v);
                            let x = d * d.abs() / self.sigma;
                            // dO/dx_j = (1 - O)·D_j and dx/dd = 2|d|/σ.
                            let s = g * empty * logistic(x) * 2.0 * d.abs() / self.sigma;
                            if s == 0.0 {
                                continue;
                            }
                            for k in 0..3 {
                                acc[f.idx[k]] += dd[k] * s;
                            }
                        }
                    }
                }
                acc
            })
            .collect();
        let mut total = vec![Vector2::zeros(); n];
        for band in &bands {
            for (t, b) in total.iter_mut().zip(band) {
                *t += b;
            }
        }
        total
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Distance from `p` to segment `ab` and its gradients with respect to `a`
/// and `b`.
fn segment_distance(p: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> (f64, Vector2<f64>, Vector2<f64>) {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let r = p - (a + ab * t);
    let dist = r.norm();
    if dist == 0.0 {
        return (0.0, Vector2::zeros(), Vector2::zeros());
    }
    let u = r / dist;
    (dist, -u * (1.0 - t), -u * t)
}

fn cross2(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Signed distance from `p` to the triangle boundary, positive inside, with
/// its gradient with respect to the three vertices.
fn signed_distance(p: &Vector2<f64>, v: &[Vector2<f64>; 3]) -> (f64, [Vector2<f64>; 3]) {
    let mut best = (f64::INFINITY, 0usize, Vector2::zeros(), Vector2::zeros());
    for k in 0..3 {
        let (d, ga, gb) = segment_distance(p, &v[k], &v[(k + 1) % 3]);
        if d < best.0 {
            best = (d, k, ga, gb);
        }
    }
    let e: [f64; 3] = std::array::from_fn(|k| cross2(&(v[(k + 1) % 3] - v[k]), &(p - v[k])));
    let inside = (e.iter().all(|&x| x >= 0.0) || e.iter().all(|&x| x <= 0.0)) && e.iter().any(|&x| x != 0.0);
    let sign = if inside { 1.0 } else { -1.0 };
    let (d, k, ga, gb) = best;
    let mut grad = [Vector2::zeros(); 3];
    grad[k] = ga * sign;
    grad[(k + 1) % 3] = gb * sign;
    (d * sign, grad)
}

/// Soft silhouette of a mesh at the camera's resolution. Per pixel,
/// `O = 1 − Π_j (1 − D_j)` with `D_j = logistic(d_j·|d_j| / sigma)`, where
/// `d_j` is the signed distance (px) to projected face `j`.
pub fn render_soft_silhouette(
    vertices: &[Vector3<f64>],
    faces: &[[usize; 3]],
    cam: &CameraIntrinsics,
    sigma: f64,
) -> Result<SoftSilhouette> {
    Ok(Scene::new(vertices, faces, cam, sigma)?.render())
}

/// Mean absolute difference and its subgradient with respect to occupancy.
#[derive(Debug, Clone, PartialEq)]
pub struct L1Loss {
    pub value: f64,
    pub grad: Vec<f64>,
}

pub fn silhouette_l1_loss(render: &SoftSilhouette, target: &MaskImage) -> Result<L1Loss> {
    if !target.is_amodal() {
        return Err(Error::ModalMask);
    }
    if (render.width, render.height) != (target.width(), target.height()) {
        return Err(Error::Dimension {
            what: "mask pixels",
            expected: render.width * render.height,
            actual: target.width() * target.height(),
        });
    }
    let n = render.occupancy.len() as f64;
    let mut value = 0.0;
    let grad = render
        .occupancy
        .iter()
        .zip(target.data())
        .map(|(&o, &t)| {
            let r = o - t as f64;
            value += r.abs();
            if r > 0.0 {
                1.0 / n
            } else if r < 0.0 {
                -1.0 / n
            } else {
                0.0
            }
        })
        .collect();
    Ok(L1Loss { value: value / n, grad })
}

#[derive(Debug, Clone)]
pub struct SilhouetteGradient {
    pub loss: f64,
    pub render: SoftSilhouette,
    /// dLoss/dVertex in mm⁻¹, one per mesh vertex.
    pub vertices: Vec<Vector3<f64>>,
}

/// L1 silhouette loss and its analytic gradient with respect to the
/// camera-frame vertex positions.
pub fn silhouette_loss_grad_vertices(
    vertices: &[Vector3<f64>],
    faces: &[[usize; 3]],
    cam: &CameraIntrinsics,
    sigma: f64,
    target: &MaskImage,
) -> Result<SilhouetteGradient> {
    let scene = Scene::new(vertices, faces, cam, sigma)?;
    let render = scene.render();
    let loss = silhouette_l1_loss(&render, target)?;
    let screen_grad = scene.backward(&render, &loss.grad);
    let grad = vertices
        .iter()
        .zip(&screen_grad)
        .map(|(v, g)| {
            let iz = 1.0 / v.z;
            let gu = g.x * cam.fx() * iz;
            let gv = g.y * cam.fy() * iz;
            Vector3::new(gu, gv, -(gu * v.x + gv * v.y) * iz)
        })
        .collect();
    Ok(SilhouetteGradient {
        loss: loss.value,
        render,
        vertices: grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signed_distance_inside_and_outside() {
        let v = [Vector2::new(0.0, 0.0), Vector2::new(4.0, 0.0), Vector2::new(0.0, 4.0)];
        let (d, _) = signed_distance(&Vector2::new(1.0, 1.0), &v);
        assert!((d - 1.0).abs() < 1e-12);
        let (d, _) = signed_distance(&Vector2::new(-2.0, 1.0), &v);
        assert!((d + 2.0).abs() < 1e-12);
        // Orientation does not matter.
        let w = [v[0], v[2], v[1]];
        assert!((signed_distance(&Vector2::new(1.0, 1.0), &w).0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn segment_distance_gradient_matches_differences() {
        let p = Vector2::new(0.3, 1.7);
        let a = Vector2::new(-1.0, 0.2);
        let b = Vector2::new(2.0, -0.4);
        let (_, ga, gb) = segment_distance(&p, &a, &b);
        let h = 1e-6;
        for c in 0..2 {
            let mut e = Vector2::zeros();
            e[c] = h;
            let fa = (segment_distance(&p, &(a + e), &b).0 - segment_distance(&p, &(a - e), &b).0) / (2.0 * h);
            let fb = (segment_distance(&p, &a, &(b + e)).0 - segment_distance(&p, &a, &(b - e)).0) / (2.0 * h);
            assert!((fa - ga[c]).abs() < 1e-8 && (fb - gb[c]).abs() < 1e-8);
        }
    }

    #[test]
    fn logistic_is_stable() {
        assert_eq!(logistic(-800.0), 0.0);
        assert_eq!(logistic(800.0), 1.0);
        assert!((logistic(0.0) - 0.5).abs() < 1e-15);
    }
}
