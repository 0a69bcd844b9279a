//! A low-poly stand-in for the MANO asset: a box palm and one closed tube
//! per phalanx, laid out in the canonical joint order.

use nalgebra::{DVector, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::keypoints::{CANONICAL_PARENTS, NUM_JOINTS, WRIST};
use super::model::SkinnedHandModel;
use super::params::DEFAULT_SHAPE_RANK;
use crate::error::{Error, Result};

/// Geometry of one finger: the first joint's rest position, the pointing
/// direction, and three phalanx lengths/radii in mm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerSpec {
    pub base: [f64; 3],
    pub direction: [f64; 3],
    pub lengths: [f64; 3],
    pub radii: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandSpec {
    /// Thumb, index, middle, ring, pinky.
    pub fingers: [FingerSpec; 5],
    pub palm_half_width: f64,
    pub palm_length: f64,
    pub palm_half_thickness: f64,
    /// Vertices per tube cross-section.
    pub ring_vertices: usize,
    pub shape_rank: usize,
    /// RMS vertex displacement (mm) per unit shape coefficient.
    pub shape_scale: f64,
    pub seed: u64,
}

impl Default for HandSpec {
    /// A right hand, palm facing +z, fingers along +y, thumb toward +x.
    fn default() -> Self {
        let finger = |base: [f64; 3], dir: [f64; 3], lengths, radii| FingerSpec {
            base,
            direction: dir,
            lengths,
            radii,
        };
        Self {
            fingers: [
                finger(
                    [26.0, 22.0, 10.0],
                    [0.62, 0.68, 0.38],
                    [38.0, 32.0, 27.0],
                    [11.0, 9.5, 8.5],
                ),
                finger([24.0, 88.0, 0.0], [0.08, 1.0, 0.0], [42.0, 26.0, 20.0], [9.0, 8.0, 7.0]),
                finger([6.0, 92.0, 0.0], [0.0, 1.0, 0.0], [46.0, 29.0, 22.0], [9.5, 8.5, 7.5]),
                finger(
                    [-12.0, 88.0, 0.0],
                    [-0.06, 1.0, 0.0],
                    [43.0, 27.0, 21.0],
                    [9.0, 8.0, 7.0],
                ),
                finger(
                    [-28.0, 80.0, 0.0],
                    [-0.15, 1.0, 0.0],
                    [34.0, 21.0, 18.0],
                    [8.0, 7.0, 6.5],
                ),
            ],
            palm_half_width: 38.0,
            palm_length: 90.0,
            palm_half_thickness: 13.0,
            ring_vertices: 8,
            shape_rank: DEFAULT_SHAPE_RANK,
            shape_scale: 1.5,
            seed: 0x5eed_ba5e,
        }
    }
}

impl HandSpec {
    fn validate(&self) -> Result<()> {
        for (f, finger) in self.fingers.iter().enumerate() {
            if finger
                .lengths
                .iter()
                .chain(&finger.radii)
                .any(|x| !(*x > 0.0) || !x.is_finite())
            {
                return Err(Error::Parameter(format!("finger {f} has a non-positive dimension")));
            }
            if Vector3::from(finger.direction).norm() < 1e-12 {
                return Err(Error::Parameter(format!("finger {f} has a zero direction")));
            }
        }
        for (name, v) in [
            ("palm_half_width", self.palm_half_width),
            ("palm_length", self.palm_length),
            ("palm_half_thickness", self.palm_half_thickness),
            ("shape_scale", self.shape_scale),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Parameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.ring_vertices < 3 {
            return Err(Error::Parameter("ring_vertices must be at least 3".into()));
        }
        Ok(())
    }
}

struct MeshBuilder {
    vertices: Vec<Vector3<f64>>,
    faces: Vec<[usize; 3]>,
    weights: Vec<[f64; NUM_JOINTS]>,
    regressor: Vec<Vec<f64>>,
}

impl MeshBuilder {
    fn push(&mut self, p: Vector3<f64>, weights: &[(usize, f64)]) -> usize {
        let mut w = [0.0; NUM_JOINTS];
        for &(j, x) in weights {
            w[j] += x;
        }
        self.vertices.push(p);
        self.weights.push(w);
        self.vertices.len() - 1
    }

    fn ring(
        &mut self,
        center: Vector3<f64>,
        dir: &Vector3<f64>,
        radius: f64,
        n: usize,
        weights: &[(usize, f64)],
    ) -> Vec<usize> {
        let helper = if dir.z.abs() < 0.9 { Vector3::z() } else { Vector3::x() };
        let u = dir.cross(&helper).normalize();
        let v = dir.cross(&u);
        (0..n)
            .map(|i| {
                let phi = std::f64::consts::TAU * i as f64 / n as f64;
                self.push(center + radius * (phi.cos() * u + phi.sin() * v), weights)
            })
            .collect()
    }
}

/// Builds the procedural hand described by `spec`.
pub fn build_procedural_hand(spec: &HandSpec) -> Result<SkinnedHandModel> {
    spec.validate()?;
    let n = spec.ring_vertices;
    let mut mb = MeshBuilder {
        vertices: Vec::new(),
        faces: Vec::new(),
        weights: Vec::new(),
        regressor: Vec::new(),
    };
    let mut reg_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); NUM_JOINTS];

    // Palm box, rigidly attached to the wrist. The bottom face straddles the
    // wrist so that its corner average lands exactly on the origin.
    let (hw, len, ht) = (spec.palm_half_width, spec.palm_length, spec.palm_half_thickness);
    let corners = [
        [-hw, 0.0, -ht],
        [hw, 0.0, -ht],
        [hw, len, -ht],
        [-hw, len, -ht],
        [-hw, 0.0, ht],
        [hw, 0.0, ht],
        [hw, len, ht],
        [-hw, len, ht],
    ];
    let b: Vec<usize> = corners
        .iter()
        .map(|c| mb.push(Vector3::from(*c), &[(WRIST, 1.0)]))
        .collect();
    for q in [
        [0, 3, 2, 1],
        [4, 5, 6, 7],
        [0, 1, 5, 4],
        [1, 2, 6, 5],
        [2, 3, 7, 6],
        [3, 0, 4, 7],
    ] {
        mb.faces.push([b[q[0]], b[q[1]], b[q[2]]]);
        mb.faces.push([b[q[0]], b[q[2]], b[q[3]]]);
    }
    reg_rows[WRIST] = [0, 1, 4, 5].iter().map(|&i| (b[i], 0.25)).collect();

    for (f, finger) in spec.fingers.iter().enumerate() {
        let dir = Vector3::from(finger.direction).normalize();
        let first = 1 + 4 * f;
        let mut start = Vector3::from(finger.base);
        for k in 0..3 {
            let joint = first + k;
            let parent = CANONICAL_PARENTS[joint].expect("finger joints have parents");
            let r = finger.radii[k];
            let end = start + dir * finger.lengths[k];

            let start_ring = mb.ring(start, &dir, r, n, &[(joint, 0.75), (parent, 0.25)]);
            let end_ring = mb.ring(end, &dir, r, n, &[(joint, 1.0)]);
            let start_cap = mb.push(start - dir * (0.6 * r), &[(joint, 0.5), (parent, 0.5)]);
            let end_cap = mb.push(end + dir * (0.6 * r), &[(joint, 1.0)]);
            for i in 0..n {
                let i1 = (i + 1) % n;
                let (s0, s1, e0, e1) = (start_ring[i], start_ring[i1], end_ring[i], end_ring[i1]);
                mb.faces.push([s0, s1, e1]);
                mb.faces.push([s0, e1, e0]);
                mb.faces.push([start_cap, s1, s0]);
                mb.faces.push([end_cap, e0, e1]);
            }

            reg_rows[joint] = start_ring.iter().map(|&v| (v, 1.0 / n as f64)).collect();
            if k == 2 {
                // Fingertip keypoints are surface vertices, not skeleton joints.
                reg_rows[joint + 1] = vec![(end_cap, 1.0)];
            }
            start = end;
        }
    }

    let nv = mb.vertices.len();
    mb.regressor = reg_rows
        .iter()
        .map(|row| {
            let mut dense = vec![0.0; nv];
            for &(v, w) in row {
                dense[v] += w;
            }
            dense
        })
        .collect();

    let basis = random_shape_basis(spec, &mb.vertices, &reg_rows[WRIST]);
    SkinnedHandModel::new(
        mb.vertices,
        mb.faces,
        CANONICAL_PARENTS,
        mb.weights,
        basis,
        mb.regressor,
    )
}

/// Orthogonal random displacement fields that leave the regressed wrist fixed.
fn random_shape_basis(
    spec: &HandSpec,
    vertices: &[Vector3<f64>],
    wrist_row: &[(usize, f64)],
) -> Vec<Vec<Vector3<f64>>> {
    let nv = vertices.len();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(spec.shape_rank);
    while basis.len() < spec.shape_rank {
        let mut d = DVector::from_fn(3 * nv, |_, _| StandardNormal.sample(&mut rng));
        let mut wrist = Vector3::zeros();
        for &(v, w) in wrist_row {
            wrist += w * Vector3::new(d[3 * v], d[3 * v + 1], d[3 * v + 2]);
        }
        for v in 0..nv {
            for c in 0..3 {
                d[3 * v + c] -= wrist[c];
            }
        }
        for q in &basis {
            let proj = q.dot(&d);
            d.axpy(-proj, q, 1.0);
        }
        let norm = d.norm();
        if norm > 1e-9 {
            basis.push(d / norm);
        }
    }
    let scale = spec.shape_scale * (nv as f64).sqrt();
    basis
        .iter()
        .map(|d| {
            (0..nv)
                .map(|v| scale * Vector3::new(d[3 * v], d[3 * v + 1], d[3 * v + 2]))
                .collect()
        })
        .collect()
}
