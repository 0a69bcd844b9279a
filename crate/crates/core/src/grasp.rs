//! Grasp classification head: an MLP over the flattened articulation with
//! a softmax cross-entropy loss, manual backpropagation and full-batch
//! training.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hand_model::NUM_ARTICULATED;

pub const NUM_GRASP_CLASSES: usize = 8;
pub const THETA_DIM: usize = 3 * NUM_ARTICULATED;

/// Opaque grasp taxonomy id in `0..8`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct GraspLabel(u8);

impl GraspLabel {
    pub fn new(id: usize) -> Result<Self> {
        if id < NUM_GRASP_CLASSES {
            Ok(Self(id as u8))
        } else {
            Err(Error::Parameter(format!(
                "grasp label {id} outside 0..{NUM_GRASP_CLASSES}"
            )))
        }
    }

    pub fn id(self) -> usize {
        self.0 as usize
    }
}

impl TryFrom<usize> for GraspLabel {
    type Error = Error;

    fn try_from(id: usize) -> Result<Self> {
        Self::new(id)
    }
}

impl From<GraspLabel> for usize {
    fn from(l: GraspLabel) -> usize {
        l.id()
    }
}

/// Layer widths. The input is θ, optionally followed by an extra feature
/// block (for example global image features).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraspConfig {
    pub hidden: [usize; 3],
    pub extra_input: usize,
}

impl Default for GraspConfig {
    fn default() -> Self {
        Self {
            hidden: [128, 64, 32],
            extra_input: 0,
        }
    }
}

impl GraspConfig {
    pub fn dims(&self) -> [usize; 5] {
        [
            THETA_DIM + self.extra_input,
            self.hidden[0],
            self.hidden[1],
            self.hidden[2],
            NUM_GRASP_CLASSES,
        ]
    }
}

/// Affine layer `y = W x + b` with `W` of shape outputs × inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: DMatrix::zeros(outputs, inputs),
            bias: DVector::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }
}

/// Four affine layers with rectifiers between them; the last layer emits
/// raw logits.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspMlp {
    layers: [Dense; 4],
}

/// Gradients share the network's layout.
pub type GraspGradients = GraspMlp;

#[derive(Serialize, Deserialize)]
struct LayerFile {
    inputs: usize,
    outputs: usize,
    /// Row-major, `outputs` rows of `inputs` values.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NetFile {
    dims: Vec<usize>,
    layers: Vec<LayerFile>,
}

impl GraspMlp {
    pub fn from_layers(layers: [Dense; 4]) -> Result<Self> {
        for (k, l) in layers.iter().enumerate() {
            if l.bias.len() != l.outputs() {
                return Err(Error::Dimension {
                    what: "layer bias",
                    expected: l.outputs(),
                    actual: l.bias.len(),
                });
            }
            if k > 0 && layers[k - 1].outputs() != l.inputs() {
                return Err(Error::Dimension {
                    what: "layer chain",
                    expected: layers[k - 1].outputs(),
                    actual: l.inputs(),
                });
            }
            if l.weights.iter().chain(l.bias.iter()).any(|v| !v.is_finite()) {
                return Err(Error::Parameter(format!("layer {k} has non-finite parameters")));
            }
        }
        if layers[3].outputs() != NUM_GRASP_CLASSES {
            return Err(Error::Dimension {
                what: "logits",
                expected: NUM_GRASP_CLASSES,
                actual: layers[3].outputs(),
            });
        }
        if layers[0].inputs() < THETA_DIM {
            return Err(Error::Dimension {
                what: "network input",
                expected: THETA_DIM,
                actual: layers[0].inputs(),
            });
        }
        Ok(Self { layers })
    }

    pub fn zeros(cfg: &GraspConfig) -> Self {
        let d = cfg.dims();
        Self {
            layers: std::array::from_fn(|k| Dense::zeros(d[k], d[k + 1])),
        }
    }

    /// He-normal weights, zero biases.
    pub fn random(cfg: &GraspConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Self::zeros(cfg);
        for l in &mut net.layers {
            let normal = Normal::new(0.0, (2.0 / l.inputs() as f64).sqrt()).expect("positive deviation");
            // Fill in row-major order so the draw sequence matches the file layout.
            for r in 0..l.outputs() {
                for c in 0..l.inputs() {
                    l.weights[(r, c)] = normal.sample(&mut rng);
                }
            }
        }
        net
    }

    pub fn layers(&self) -> &[Dense; 4] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense; 4] {
        &mut self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn dims(&self) -> [usize; 5] {
        let mut d = [self.layers[0].inputs(), 0, 0, 0, 0];
        for (k, l) in self.layers.iter().enumerate() {
            d[k + 1] = l.outputs();
        }
        d
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_width() {
            return Err(Error::Dimension {
                what: "network input",
                expected: self.input_width(),
                actual: input.len(),
            });
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("network input must be finite".into()));
        }
        Ok(())
    }

    /// Pre-activations of every layer.
    fn pre_activations(&self, input: &[f64]) -> Vec<DVector<f64>> {
        let mut out = Vec::with_capacity(4);
        let mut a = DVector::from_column_slice(input);
        for (k, l) in self.layers.iter().enumerate() {
            let z = &l.weights * &a + &l.bias;
            if k < 3 {
                a = z.map(relu);
            }
            out.push(z);
        }
        out
    }

    pub fn forward(&self, input: &[f64]) -> Result<DVector<f64>> {
        self.check_input(input)?;
        Ok(self.pre_activations(input).pop().expect("four layers"))
    }

    /// Loss and parameter gradients for one sample.
    pub fn backward(&self, input: &[f64], label: GraspLabel) -> Result<(f64, GraspGradients)> {
        self.check_input(input)?;
        let z = self.pre_activations(input);
        let (loss, mut delta) = cross_entropy(&z[3], label)?;
        let mut grads = self.clone();
        for k in (0..4).rev() {
            let a_prev = if k == 0 {
                DVector::from_column_slice(input)
            } else {
                z[k - 1].map(relu)
            };
            grads.layers[k].weights = &delta * a_prev.transpose();
            grads.layers[k].bias = delta.clone();
            if k > 0 {
                let back = self.layers[k].weights.transpose() * &delta;
                delta = back.zip_map(&z[k - 1], |g, pre| if pre > 0.0 { g } else { 0.0 });
            }
        }
        Ok((loss, grads))
    }

    pub fn predict(&self, input: &[f64]) -> Result<GraspLabel> {
        let logits = self.forward(input)?;
        Ok(GraspLabel(logits.argmax().0 as u8))
    }

    /// Number of scalar parameters.
    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Visits every parameter in a fixed order: per layer, weights row-major
    /// then biases.
    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        for l in &mut self.layers {
            for r in 0..l.outputs() {
                for c in 0..l.inputs() {
                    f(&mut l.weights[(r, c)]);
                }
            }
            l.bias.iter_mut().for_each(&mut f);
        }
    }

    pub fn params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_parameters());
        self.clone().for_each_param_mut(|p| v.push(*p));
        v
    }

    fn axpy(&mut self, alpha: f64, other: &GraspMlp) {
        for (l, o) in self.layers.iter_mut().zip(&other.layers) {
            l.weights += &o.weights * alpha;
            l.bias += &o.bias * alpha;
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = NetFile {
            dims: self.dims().to_vec(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    inputs: l.inputs(),
                    outputs: l.outputs(),
                    weights: l.weights.transpose().as_slice().to_vec(),
                    bias: l.bias.as_slice().to_vec(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: NetFile = serde_json::from_str(s)?;
        if file.layers.len() != 4 || file.dims.len() != 5 {
            return Err(Error::Format(format!(
                "expected 4 layers and 5 widths, got {} and {}",
                file.layers.len(),
                file.dims.len()
            )));
        }
        let layers = file
            .layers
            .iter()
            .enumerate()
            .map(|(k, l)| {
                if (l.inputs, l.outputs) != (file.dims[k], file.dims[k + 1]) {
                    return Err(Error::Format(format!("layer {k} widths disagree with dims")));
                }
                if l.weights.len() != l.inputs * l.outputs {
                    return Err(Error::Dimension {
                        what: "layer weights",
                        expected: l.inputs * l.outputs,
                        actual: l.weights.len(),
                    });
                }
                Ok(Dense {
                    weights: DMatrix::from_row_slice(l.outputs, l.inputs, &l.weights),
                    bias: DVector::from_vec(l.bias.clone()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let layers: [Dense; 4] = layers.try_into().expect("length checked");
        Self::from_layers(layers)
    }
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Softmax with max subtraction.
pub fn softmax(logits: &DVector<f64>) -> DVector<f64> {
    let m = logits.max();
    let e = logits.map(|z| (z - m).exp());
    let s = e.sum();
    e / s
}

/// `-log softmax(logits)[label]` and its gradient `softmax - onehot`.
pub fn cross_entropy(logits: &DVector<f64>, label: GraspLabel) -> Result<(f64, DVector<f64>)> {
    if logits.len() != NUM_GRASP_CLASSES {
        return Err(Error::Dimension {
            what: "logits",
            expected: NUM_GRASP_CLASSES,
            actual: logits.len(),
        });
    }
    let m = logits.max();
    let log_sum = logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln() + m;
    let loss = log_sum - logits[label.id()];
    let mut grad = softmax(logits);
    grad[label.id()] -= 1.0;
    Ok((loss, grad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspSample {
    /// θ followed by any extra input features.
    pub theta: Vec<f64>,
    pub label: GraspLabel,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GraspDataset {
    pub samples: Vec<GraspSample>,
}

impl GraspDataset {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn class_count(&self) -> usize {
        let mut seen = [false; NUM_GRASP_CLASSES];
        for s in &self.samples {
            seen[s.label.id()] = true;
        }
        seen.iter().filter(|&&b| b).count()
    }

    /// Samples in a canonical order (label, then θ by total order), so
    /// full-batch sums do not depend on how the dataset was shuffled.
    fn canonical(&self) -> Vec<&GraspSample> {
        let mut v: Vec<&GraspSample> = self.samples.iter().collect();
        v.sort_by(|a, b| {
            a.label.cmp(&b.label).then_with(|| {
                a.theta
                    .iter()
                    .zip(&b.theta)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| *o != Ordering::Equal)
                    .unwrap_or_else(|| a.theta.len().cmp(&b.theta.len()))
            })
        });
        v
    }
}

/// Samples as matrix columns in canonical order, labels alongside.
struct Batch {
    inputs: DMatrix<f64>,
    labels: Vec<GraspLabel>,
}

impl Batch {
    fn new(net: &GraspMlp, data: &GraspDataset) -> Result<Self> {
        if data.samples.is_empty() {
            return Err(Error::Parameter("empty batch".into()));
        }
        let samples = data.canonical();
        for s in &samples {
            net.check_input(&s.theta)?;
        }
        let inputs = DMatrix::from_fn(net.input_width(), samples.len(), |r, c| samples[c].theta[r]);
        Ok(Self {
            inputs,
            labels: samples.iter().map(|s| s.label).collect(),
        })
    }

    fn len(&self) -> usize {
        self.labels.len()
    }
}

/// Batched forward pass: pre-activations of every layer, one column per
/// sample.
fn batch_pre_activations(net: &GraspMlp, x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    let mut out: Vec<DMatrix<f64>> = Vec::with_capacity(4);
    for (k, l) in net.layers.iter().enumerate() {
        let mut z = if k == 0 {
            &l.weights * x
        } else {
            &l.weights * out[k - 1].map(relu)
        };
        for mut col in z.column_iter_mut() {
            col += &l.bias;
        }
        out.push(z);
    }
    out
}

/// Mean loss, accuracy and mean gradient of a prepared batch.
fn batch_step(net: &GraspMlp, batch: &Batch) -> Result<(f64, f64, GraspGradients)> {
    let z = batch_pre_activations(net, &batch.inputs);
    let n = batch.len() as f64;
    let mut delta = DMatrix::zeros(NUM_GRASP_CLASSES, batch.len());
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (c, label) in batch.labels.iter().enumerate() {
        let logits = z[3].column(c).into_owned();
        let (l, g) = cross_entropy(&logits, *label)?;
        loss += l;
        correct += (logits.argmax().0 == label.id()) as usize;
        delta.set_column(c, &(g / n));
    }
    let mut grads = net.clone();
    for k in (0..4).rev() {
        let prev_act;
        let a_prev = if k == 0 {
            &batch.inputs
        } else {
            prev_act = z[k - 1].map(relu);
            &prev_act
        };
        grads.layers[k].weights = &delta * a_prev.transpose();
        grads.layers[k].bias = delta.column_sum();
        if k > 0 {
            let back = net.layers[k].weights.transpose() * &delta;
            delta = back.zip_map(&z[k - 1], |g, pre| if pre > 0.0 { g } else { 0.0 });
        }
    }
    Ok((loss / n, correct as f64 / n, grads))
}

/// Mean loss and mean gradient over a batch. Samples are taken in a
/// canonical order, so the result does not depend on dataset order.
pub fn batch_gradient(net: &GraspMlp, data: &GraspDataset) -> Result<(f64, GraspGradients)> {
    let (loss, _, grads) = batch_step(net, &Batch::new(net, data)?)?;
    Ok((loss, grads))
}

/// Mean loss and accuracy.
pub fn evaluate(net: &GraspMlp, data: &GraspDataset) -> Result<(f64, f64)> {
    let (loss, acc, _) = batch_step(net, &Batch::new(net, data)?)?;
    Ok((loss, acc))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Seed of the weight initialization.
    pub seed: u64,
    pub net: GraspConfig,
    /// Only the last layer is updated; the loss is then convex in the
    /// trained parameters.
    pub freeze_hidden: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            lr: 0.05,
            seed: 0,
            net: GraspConfig::default(),
            freeze_hidden: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub net: GraspMlp,
    /// Full-batch loss and accuracy at the start of each epoch.
    pub loss: Vec<f64>,
    pub accuracy: Vec<f64>,
    pub final_loss: f64,
    pub final_accuracy: f64,
    pub warnings: Vec<String>,
}

/// Full-batch gradient descent from a seeded initialization.
pub fn train_grasp_toy(data: &GraspDataset, cfg: &TrainConfig) -> Result<TrainReport> {
    let net = GraspMlp::random(&cfg.net, cfg.seed);
    train_from(net, data, cfg)
}

/// Full-batch gradient descent starting from `net`.
pub fn train_from(mut net: GraspMlp, data: &GraspDataset, cfg: &TrainConfig) -> Result<TrainReport> {
    if data.samples.is_empty() {
        return Err(Error::Parameter("training needs a non-empty dataset".into()));
    }
    if !(cfg.lr >= 0.0 && cfg.lr.is_finite()) {
        return Err(Error::Parameter(format!(
            "learning rate must be non-negative, got {}",
            cfg.lr
        )));
    }
    let mut warnings = Vec::new();
    if data.class_count() < 2 {
        warnings.push("dataset covers a single grasp class; the classifier is degenerate".to_string());
    }
    let batch = Batch::new(&net, data)?;
    let mut loss = Vec::with_capacity(cfg.epochs);
    let mut accuracy = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let (l, acc, mut g) = batch_step(&net, &batch)?;
        loss.push(l);
        accuracy.push(acc);
        if cfg.freeze_hidden {
            for layer in &mut g.layers[..3] {
                layer.weights.fill(0.0);
                layer.bias.fill(0.0);
            }
        }
        net.axpy(-cfg.lr, &g);
    }
    let (final_loss, final_accuracy, _) = batch_step(&net, &batch)?;
    Ok(TrainReport {
        net,
        loss,
        accuracy,
        final_loss,
        final_accuracy,
        warnings,
    })
}

/// Eight separable clusters: a canonical articulation per class (uniform
/// in ±`spread` rad) plus uniform noise of ±`noise` rad per component.
pub fn toy_grasp_dataset(per_class: usize, spread: f64, noise: f64, seed: u64) -> GraspDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..NUM_GRASP_CLASSES)
        .map(|_| (0..THETA_DIM).map(|_| rng.gen_range(-spread..=spread)).collect())
        .collect();
    let mut samples = Vec::with_capacity(per_class * NUM_GRASP_CLASSES);
    for _ in 0..per_class {
        for (class, c) in centers.iter().enumerate() {
            samples.push(GraspSample {
                theta: c.iter().map(|v| v + rng.gen_range(-noise..=noise)).collect(),
                label: GraspLabel(class as u8),
            });
        }
    }
    GraspDataset { samples }
}
