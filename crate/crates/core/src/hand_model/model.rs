use std::collections::HashMap;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::keypoints::{KeypointSet3D, NUM_JOINTS};
use super::params::{HandParams, NUM_ARTICULATED};
use crate::error::{Error, Result};
use crate::rotation::rodrigues;

const WEIGHT_SUM_TOL: f64 = 1e-9;
const REGRESSOR_SUM_TOL: f64 = 1e-6;

/// A MANO-compatible skinned hand: template mesh, skeleton, blend weights,
/// shape basis and a joint regressor.
///
/// Immutable after construction. Joints must be stored so that every parent
/// precedes its children.
#[derive(Debug, Clone, PartialEq)]
pub struct SkinnedHandModel {
    template_vertices: Vec<Vector3<f64>>,
    faces: Vec<[usize; 3]>,
    joint_parents: [Option<usize>; NUM_JOINTS],
    rest_joints: [Vector3<f64>; NUM_JOINTS],
    skinning_weights: Vec<[f64; NUM_JOINTS]>,
    /// `shape_basis[b][v]` is the displacement of vertex `v` per unit `beta[b]`.
    shape_basis: Vec<Vec<Vector3<f64>>>,
    /// Sparse rows: `(vertex, weight)` pairs per joint.
    joint_regressor: Vec<Vec<(usize, f64)>>,
    articulated: [usize; NUM_ARTICULATED],
}

/// Template geometry after shape blending.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapedHand {
    pub vertices: Vec<Vector3<f64>>,
    pub joints: [Vector3<f64>; NUM_JOINTS],
}

/// Output of forward kinematics plus skinning.
#[derive(Debug, Clone, PartialEq)]
pub struct PosedHand {
    pub joints: KeypointSet3D,
    pub vertices: Vec<Vector3<f64>>,
    /// World rotation of each joint.
    pub joint_rotations: [Matrix3<f64>; NUM_JOINTS],
}

/// JSON layout of a model file. Regressor rows are dense (21 x V).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub template_vertices: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
    /// Parent index per joint, `-1` for the root.
    pub joint_parents: Vec<i64>,
    /// Informational on write; checked against the regressor on read.
    #[serde(default)]
    pub rest_joints: Option<Vec<[f64; 3]>>,
    pub skinning_weights: Vec<Vec<f64>>,
    /// V x 3 x B.
    pub shape_basis: Vec<[Vec<f64>; 3]>,
    pub joint_regressor: Vec<Vec<f64>>,
}

impl SkinnedHandModel {
    /// Validates and assembles a model. `joint_regressor` is dense, 21 x V.
    pub fn new(
        template_vertices: Vec<Vector3<f64>>,
        faces: Vec<[usize; 3]>,
        joint_parents: [Option<usize>; NUM_JOINTS],
        skinning_weights: Vec<[f64; NUM_JOINTS]>,
        shape_basis: Vec<Vec<Vector3<f64>>>,
        joint_regressor: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let nv = template_vertices.len();
        if nv == 0 {
            return Err(Error::Parameter("model has no vertices".into()));
        }
        if template_vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::Parameter("template vertex is not finite".into()));
        }
        if let Some((i, f)) = faces.iter().enumerate().find(|(_, f)| f.iter().any(|&v| v >= nv)) {
            return Err(Error::Parameter(format!("face {i} {f:?} indexes past {nv} vertices")));
        }

        if joint_parents[0].is_some() {
            return Err(Error::Parameter("joint 0 must be the root".into()));
        }
        for (j, p) in joint_parents.iter().enumerate().skip(1) {
            match p {
                Some(p) if *p < j => {}
                Some(p) => {
                    return Err(Error::Parameter(format!(
                        "joint {j} has parent {p}; parents must precede children"
                    )))
                }
                None => return Err(Error::Parameter(format!("joint {j} has no parent"))),
            }
        }
        let mut has_child = [false; NUM_JOINTS];
        for p in joint_parents.iter().flatten() {
            has_child[*p] = true;
        }
        let articulated_list: Vec<usize> = (1..NUM_JOINTS).filter(|&j| has_child[j]).collect();
        let articulated: [usize; NUM_ARTICULATED] =
            articulated_list.as_slice().try_into().map_err(|_| Error::Dimension {
                what: "articulated (non-root, non-leaf) joints",
                expected: NUM_ARTICULATED,
                actual: articulated_list.len(),
            })?;

        if skinning_weights.len() != nv {
            return Err(Error::Dimension {
                what: "skinning weight rows",
                expected: nv,
                actual: skinning_weights.len(),
            });
        }
        for (v, row) in skinning_weights.iter().enumerate() {
            if row.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
                return Err(Error::Parameter(format!("negative skinning weight at vertex {v}")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > WEIGHT_SUM_TOL {
                return Err(Error::Parameter(format!("skinning weights of vertex {v} sum to {s}")));
            }
        }

        for (b, dirs) in shape_basis.iter().enumerate() {
            if dirs.len() != nv {
                return Err(Error::Dimension {
                    what: "shape basis vertices",
                    expected: nv,
                    actual: dirs.len(),
                });
            }
            if dirs.iter().any(|d| !d.iter().all(|c| c.is_finite())) {
                return Err(Error::Parameter(format!("shape basis {b} is not finite")));
            }
        }

        if joint_regressor.len() != NUM_JOINTS {
            return Err(Error::Dimension {
                what: "joint regressor rows",
                expected: NUM_JOINTS,
                actual: joint_regressor.len(),
            });
        }
        let mut sparse = Vec::with_capacity(NUM_JOINTS);
        for (j, row) in joint_regressor.iter().enumerate() {
            if row.len() != nv {
                return Err(Error::Dimension {
                    what: "joint regressor columns",
                    expected: nv,
                    actual: row.len(),
                });
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > REGRESSOR_SUM_TOL || row.iter().any(|w| !w.is_finite()) {
                return Err(Error::Parameter(format!("regressor row {j} sums to {s}")));
            }
            sparse.push(
                row.iter()
                    .enumerate()
                    .filter(|(_, w)| **w != 0.0)
                    .map(|(v, w)| (v, *w))
                    .collect::<Vec<_>>(),
            );
        }

        let mut model = Self {
            template_vertices,
            faces,
            joint_parents,
            rest_joints: [Vector3::zeros(); NUM_JOINTS],
            skinning_weights,
            shape_basis,
            joint_regressor: sparse,
            articulated,
        };
        model.rest_joints = model.regress_joints(&model.template_vertices);
        Ok(model)
    }

    pub fn from_file(file: ModelFile) -> Result<Self> {
        let vertices: Vec<Vector3<f64>> = file.template_vertices.iter().map(|v| Vector3::from(*v)).collect();
        if file.joint_parents.len() != NUM_JOINTS {
            return Err(Error::Dimension {
                what: "joint parents",
                expected: NUM_JOINTS,
                actual: file.joint_parents.len(),
            });
        }
        let mut parents = [None; NUM_JOINTS];
        for (j, p) in file.joint_parents.iter().enumerate() {
            parents[j] = match *p {
                p if p < 0 => None,
                p => Some(p as usize),
            };
        }
        let weights = file
            .skinning_weights
            .iter()
            .map(|row| {
                <[f64; NUM_JOINTS]>::try_from(row.as_slice()).map_err(|_| Error::Dimension {
                    what: "skinning weight columns",
                    expected: NUM_JOINTS,
                    actual: row.len(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let rank = file.shape_basis.first().map_or(0, |v| v[0].len());
        if file.shape_basis.len() != vertices.len() && rank > 0 {
            return Err(Error::Dimension {
                what: "shape basis vertices",
                expected: vertices.len(),
                actual: file.shape_basis.len(),
            });
        }
        let mut basis = vec![Vec::with_capacity(vertices.len()); rank];
        for (v, xyz) in file.shape_basis.iter().enumerate() {
            if xyz.iter().any(|c| c.len() != rank) {
                return Err(Error::Format(format!("shape basis rank differs at vertex {v}")));
            }
            for (b, dirs) in basis.iter_mut().enumerate() {
                dirs.push(Vector3::new(xyz[0][b], xyz[1][b], xyz[2][b]));
            }
        }
        let model = Self::new(vertices, file.faces, parents, weights, basis, file.joint_regressor)?;
        if let Some(rest) = file.rest_joints {
            if rest.len() != NUM_JOINTS {
                return Err(Error::Dimension {
                    what: "rest joints",
                    expected: NUM_JOINTS,
                    actual: rest.len(),
                });
            }
            for (j, r) in rest.iter().enumerate() {
                if (Vector3::from(*r) - model.rest_joints[j]).norm() > 1e-6 {
                    return Err(Error::Format(format!(
                        "rest joint {j} disagrees with the regressed template"
                    )));
                }
            }
        }
        Ok(model)
    }

    pub fn to_file(&self) -> ModelFile {
        let nv = self.template_vertices.len();
        ModelFile {
            template_vertices: self.template_vertices.iter().map(|v| [v.x, v.y, v.z]).collect(),
            faces: self.faces.clone(),
            joint_parents: self.joint_parents.iter().map(|p| p.map_or(-1, |p| p as i64)).collect(),
            rest_joints: Some(self.rest_joints.iter().map(|v| [v.x, v.y, v.z]).collect()),
            skinning_weights: self.skinning_weights.iter().map(|r| r.to_vec()).collect(),
            shape_basis: (0..nv)
                .map(|v| std::array::from_fn(|c| self.shape_basis.iter().map(|b| b[v][c]).collect()))
                .collect(),
            joint_regressor: self
                .joint_regressor
                .iter()
                .map(|row| {
                    let mut dense = vec![0.0; nv];
                    for &(v, w) in row {
                        dense[v] = w;
                    }
                    dense
                })
                .collect(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_file())?)
    }

    pub fn template_vertices(&self) -> &[Vector3<f64>] {
        &self.template_vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn joint_parents(&self) -> &[Option<usize>; NUM_JOINTS] {
        &self.joint_parents
    }

    pub fn rest_joints(&self) -> &[Vector3<f64>; NUM_JOINTS] {
        &self.rest_joints
    }

    pub fn skinning_weights(&self) -> &[[f64; NUM_JOINTS]] {
        &self.skinning_weights
    }

    pub fn shape_basis(&self) -> &[Vec<Vector3<f64>>] {
        &self.shape_basis
    }

    pub fn shape_rank(&self) -> usize {
        self.shape_basis.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.template_vertices.len()
    }

    /// Joint index driven by `theta[k]`.
    pub fn articulated_joints(&self) -> &[usize; NUM_ARTICULATED] {
        &self.articulated
    }

    /// Joint positions as regressor-weighted vertex averages.
    pub fn regress_joints(&self, vertices: &[Vector3<f64>]) -> [Vector3<f64>; NUM_JOINTS] {
        std::array::from_fn(|j| {
            self.joint_regressor[j]
                .iter()
                .fold(Vector3::zeros(), |acc, &(v, w)| acc + vertices[v] * w)
        })
    }

    /// Linear shape blending followed by joint regression.
    pub fn shape_hand(&self, beta: &[f64]) -> Result<ShapedHand> {
        if beta.len() != self.shape_rank() {
            return Err(Error::Dimension {
                what: "beta",
                expected: self.shape_rank(),
                actual: beta.len(),
            });
        }
        let mut vertices = self.template_vertices.clone();
        for (b, coeff) in beta.iter().enumerate() {
            if *coeff == 0.0 {
                continue;
            }
            for (v, d) in vertices.iter_mut().zip(&self.shape_basis[b]) {
                *v += d * *coeff;
            }
        }
        let joints = self.regress_joints(&vertices);
        Ok(ShapedHand { vertices, joints })
    }

    /// Poses the hand: joint transforms are composed from the root down the
    /// tree, then vertices are deformed by linear blend skinning.
    pub fn forward_kinematics(&self, params: &HandParams) -> Result<PosedHand> {
        params.validate()?;
        let shaped = self.shape_hand(&params.beta)?;
        let rest = &shaped.joints;

        let mut local = [Matrix3::identity(); NUM_JOINTS];
        for (k, &j) in self.articulated.iter().enumerate() {
            local[j] = rodrigues(&params.theta[k]);
        }

        let root_rot = params.root_rotation();
        let mut rot = [Matrix3::identity(); NUM_JOINTS];
        let mut pos = [Vector3::zeros(); NUM_JOINTS];
        rot[0] = root_rot;
        pos[0] = root_rot * rest[0] + params.root_trans;
        for j in 1..NUM_JOINTS {
            let p = self.joint_parents[j].expect("validated tree");
            rot[j] = rot[p] * local[j];
            pos[j] = pos[p] + rot[p] * (rest[j] - rest[p]);
        }

        let vertices = shaped
            .vertices
            .iter()
            .zip(&self.skinning_weights)
            .map(|(v, w)| {
                let mut out = Vector3::zeros();
                for j in 0..NUM_JOINTS {
                    if w[j] != 0.0 {
                        out += w[j] * (rot[j] * (v - rest[j]) + pos[j]);
                    }
                }
                out
            })
            .collect();

        Ok(PosedHand {
            joints: KeypointSet3D::new(pos)?,
            vertices,
            joint_rotations: rot,
        })
    }

    /// True when every undirected edge borders exactly two faces that use it
    /// in opposite directions.
    pub fn is_watertight(&self) -> bool {
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for f in &self.faces {
            for k in 0..3 {
                *directed.entry((f[k], f[(k + 1) % 3])).or_default() += 1;
            }
        }
        directed
            .iter()
            .all(|(&(a, b), &n)| n == 1 && directed.get(&(b, a)) == Some(&1))
    }
}
