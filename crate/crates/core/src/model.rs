//! Softmax classifiers: a linear model and a ReLU MLP with inverted dropout.
//!
//! Parameters live in one flat vector. Each dense layer stores its weight
//! matrix row-major with shape `(inputs, outputs)`, followed by its bias.
//!
//! The training loss is group-weighted cross-entropy,
//! `L = Σ_k w_k · mean_{i ∈ batch, g(i) = k} CE_i`, so each group's pull is
//! independent of how many of its examples the batch happens to hold.
//! Weights may be negative.

use std::path::Path;

use ndarray::{Array2, ArrayView2, ArrayViewMut2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{stream, stream_rng};
use crate::{numfmt, Error, Result};

pub mod gradcheck;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    Linear,
    Mlp { hidden: Vec<usize>, dropout: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub architecture: Architecture,
    pub input_dim: usize,
    pub class_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
}

impl LayerShape {
    fn len(&self) -> usize {
        self.inputs * self.outputs + self.outputs
    }
}

impl ModelSpec {
    pub fn linear(input_dim: usize, class_count: usize) -> Self {
        ModelSpec {
            architecture: Architecture::Linear,
            input_dim,
            class_count,
        }
    }

    pub fn mlp(input_dim: usize, class_count: usize, hidden: Vec<usize>, dropout: f64) -> Self {
        ModelSpec {
            architecture: Architecture::Mlp { hidden, dropout },
            input_dim,
            class_count,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.class_count < 2 {
            return Err(Error::Config(format!(
                "model needs input_dim > 0 and at least 2 classes (got {} and {})",
                self.input_dim, self.class_count
            )));
        }
        if let Architecture::Mlp { hidden, dropout } = &self.architecture {
            if hidden.is_empty() || hidden.contains(&0) {
                return Err(Error::Config(
                    "MLP hidden sizes must be a nonempty list of positive integers".into(),
                ));
            }
            if !(0.0..1.0).contains(dropout) {
                return Err(Error::Config(format!(
                    "dropout rate must lie in [0, 1), got {dropout}"
                )));
            }
        }
        Ok(())
    }

    pub fn layers(&self) -> Vec<LayerShape> {
        let mut sizes = vec![self.input_dim];
        if let Architecture::Mlp { hidden, .. } = &self.architecture {
            sizes.extend(hidden);
        }
        sizes.push(self.class_count);
        sizes
            .windows(2)
            .map(|w| LayerShape {
                inputs: w[0],
                outputs: w[1],
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(LayerShape::len).sum()
    }

    fn dropout(&self) -> f64 {
        match self.architecture {
            Architecture::Linear => 0.0,
            Architecture::Mlp { dropout, .. } => dropout,
        }
    }
}

/// Flat parameter vector with its layer layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub layers: Vec<LayerShape>,
    #[serde(serialize_with = "numfmt::ser_vec")]
    pub theta: Vec<f64>,
}

impl Parameters {
    pub fn zeros(spec: &ModelSpec) -> Self {
        Parameters {
            layers: spec.layers(),
            theta: vec![0.0; spec.param_count()],
        }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    fn offsets(&self) -> impl Iterator<Item = (LayerShape, usize)> + '_ {
        self.layers.iter().scan(0, |off, &l| {
            let start = *off;
            *off += l.len();
            Some((l, start))
        })
    }

    fn layer(&self, idx: usize) -> (ArrayView2<'_, f64>, &[f64]) {
        let (shape, off) = self.offsets().nth(idx).expect("layer index");
        split_layer(&self.theta, shape, off)
    }

    pub fn is_consistent_with(&self, spec: &ModelSpec) -> bool {
        self.layers == spec.layers() && self.theta.len() == spec.param_count()
    }
}

fn split_layer(theta: &[f64], shape: LayerShape, off: usize) -> (ArrayView2<'_, f64>, &[f64]) {
    let nw = shape.inputs * shape.outputs;
    let w = ArrayView2::from_shape((shape.inputs, shape.outputs), &theta[off..off + nw])
        .expect("layer shape");
    (w, &theta[off + nw..off + nw + shape.outputs])
}

/// Model checkpoint file: spec plus parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub spec: ModelSpec,
    pub params: Parameters,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::data(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint =
            serde_json::from_str(text).map_err(|e| Error::data(format!("checkpoint: {e}")))?;
        if !ckpt.params.is_consistent_with(&ckpt.spec) {
            return Err(Error::data(
                "checkpoint parameters do not match its model spec",
            ));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
pub fn init_params(spec: &ModelSpec, seed: u64) -> Parameters {
    let mut rng = stream_rng(seed, stream::INIT);
    let mut params = Parameters::zeros(spec);
    let offsets: Vec<_> = params.offsets().collect();
    for (shape, off) in offsets {
        let bound = 1.0 / (shape.inputs as f64).sqrt();
        for v in &mut params.theta[off..off + shape.inputs * shape.outputs] {
            *v = rng.random_range(-bound..bound);
        }
    }
    params
}

/// Cached forward pass over a batch.
#[derive(Debug, Clone)]
pub struct Forward {
    /// Input to each layer (post-ReLU, post-dropout for hidden layers).
    inputs: Vec<Array2<f64>>,
    /// Inverted-dropout multipliers per hidden layer (0 or 1/(1-p)).
    masks: Vec<Option<Array2<f64>>>,
    pub logits: Array2<f64>,
    pub probs: Array2<f64>,
}

impl Forward {
    /// Argmax class per row, ties toward the lower index.
    pub fn labels(&self) -> Vec<usize> {
        argmax_rows(&self.probs)
    }
}

fn argmax_rows(m: &Array2<f64>) -> Vec<usize> {
    m.outer_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut p = logits.clone();
    for mut row in p.outer_iter_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    p
}

/// Runs the network. `dropout_seed = None` evaluates without dropout.
pub fn forward(
    params: &Parameters,
    spec: &ModelSpec,
    x: ArrayView2<'_, f64>,
    dropout_seed: Option<u64>,
) -> Forward {
    assert_eq!(x.ncols(), spec.input_dim, "feature dimension mismatch");
    let p_drop = spec.dropout();
    let mut rng = dropout_seed
        .filter(|_| p_drop > 0.0)
        .map(ChaCha8Rng::seed_from_u64);
    let n_layers = params.layers.len();
    let mut inputs = Vec::with_capacity(n_layers);
    let mut masks = Vec::with_capacity(n_layers.saturating_sub(1));
    let mut h = x.to_owned();
    for l in 0..n_layers {
        let (w, b) = params.layer(l);
        let mut z = h.dot(&w);
        for mut row in z.outer_iter_mut() {
            row.iter_mut().zip(b).for_each(|(v, bj)| *v += bj);
        }
        inputs.push(h);
        if l + 1 == n_layers {
            let probs = softmax_rows(&z);
            return Forward {
                inputs,
                masks,
                logits: z,
                probs,
            };
        }
        z.mapv_inplace(|v| v.max(0.0));
        let mask = rng.as_mut().map(|rng| {
            let keep = 1.0 / (1.0 - p_drop);
            Array2::from_shape_fn(z.raw_dim(), |_| {
                if rng.random::<f64>() < p_drop {
                    0.0
                } else {
                    keep
                }
            })
        });
        if let Some(m) = &mask {
            z *= m;
        }
        masks.push(mask);
        h = z;
    }
    unreachable!("a model has at least one layer")
}

/// Class probabilities and argmax labels (no dropout).
pub fn predict(
    params: &Parameters,
    spec: &ModelSpec,
    x: ArrayView2<'_, f64>,
) -> (Array2<f64>, Vec<usize>) {
    let fwd = forward(params, spec, x, None);
    let labels = fwd.labels();
    (fwd.probs, labels)
}

#[derive(Debug, Clone, Copy)]
pub struct WeightedBatch<'a> {
    pub features: ArrayView2<'a, f64>,
    pub labels: &'a [usize],
    pub groups: &'a [usize],
    /// Per-group weights, indexed by group.
    pub weights: &'a [f64],
}

/// Per-example loss coefficient `w_g / n_g` (n_g = examples of g in batch).
fn example_coefficients(batch: &WeightedBatch<'_>) -> Vec<f64> {
    let mut counts = vec![0usize; batch.weights.len()];
    for &g in batch.groups {
        counts[g] += 1;
    }
    batch
        .groups
        .iter()
        .map(|&g| batch.weights[g] / counts[g] as f64)
        .collect()
}

fn cross_entropy(logits: ndarray::ArrayView1<'_, f64>, label: usize) -> f64 {
    let max = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}

fn loss_from_forward(fwd: &Forward, batch: &WeightedBatch<'_>, coef: &[f64]) -> Result<f64> {
    let loss: f64 = fwd
        .logits
        .outer_iter()
        .zip(batch.labels)
        .zip(coef)
        .map(|((z, &y), c)| c * cross_entropy(z, y))
        .sum();
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::NonFinite)
    }
}

/// Loss only; used as the oracle side of gradient checks.
pub fn weighted_loss(
    params: &Parameters,
    spec: &ModelSpec,
    batch: &WeightedBatch<'_>,
    dropout_seed: Option<u64>,
) -> Result<f64> {
    let fwd = forward(params, spec, batch.features, dropout_seed);
    loss_from_forward(&fwd, batch, &example_coefficients(batch))
}

/// Loss and analytic gradient, reusing a forward pass computed on
/// `batch.features`.
pub fn backward(
    params: &Parameters,
    fwd: &Forward,
    batch: &WeightedBatch<'_>,
) -> Result<(f64, Vec<f64>)> {
    let coef = example_coefficients(batch);
    let loss = loss_from_forward(fwd, batch, &coef)?;
    let mut grad = vec![0.0; params.theta.len()];
    let offsets: Vec<_> = params.offsets().collect();

    // dL/dlogits = c_i (p_i - onehot(y_i))
    let mut delta = fwd.probs.clone();
    for ((mut row, &y), c) in delta.outer_iter_mut().zip(batch.labels).zip(&coef) {
        row[y] -= 1.0;
        row.mapv_inplace(|v| v * c);
    }
    for l in (0..offsets.len()).rev() {
        let (shape, off) = offsets[l];
        let nw = shape.inputs * shape.outputs;
        {
            let (gw, gb) = grad[off..off + nw + shape.outputs].split_at_mut(nw);
            let mut gw =
                ArrayViewMut2::from_shape((shape.inputs, shape.outputs), gw).expect("layer shape");
            gw.assign(&fwd.inputs[l].t().dot(&delta));
            for (g, v) in gb.iter_mut().zip(delta.sum_axis(Axis(0))) {
                *g = v;
            }
        }
        if l == 0 {
            break;
        }
        let (w, _) = split_layer(&params.theta, shape, off);
        let mut dh = delta.dot(&w.t());
        // fwd.inputs[l] = relu(z) * mask; zero exactly where relu or dropout cut it
        if let Some(m) = &fwd.masks[l - 1] {
            dh *= m;
        }
        ndarray::Zip::from(&mut dh)
            .and(&fwd.inputs[l])
            .for_each(|d, &a| {
                if a <= 0.0 {
                    *d = 0.0;
                }
            });
        delta = dh;
    }
    Ok((loss, grad))
}

pub fn weighted_loss_grad(
    params: &Parameters,
    spec: &ModelSpec,
    batch: &WeightedBatch<'_>,
    dropout_seed: Option<u64>,
) -> Result<(f64, Vec<f64>)> {
    let fwd = forward(params, spec, batch.features, dropout_seed);
    backward(params, &fwd, batch)
}

/// Rescales `grad` in place to L2 norm `max_norm` if it is longer.
pub fn clip_gradient(grad: &mut [f64], max_norm: f64) {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= scale);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn parameter_counts() {
        assert_eq!(ModelSpec::linear(3, 2).param_count(), 8);
        let mlp = ModelSpec::mlp(9, 2, vec![128, 64, 32], 0.2);
        assert_eq!(
            mlp.param_count(),
            9 * 128 + 128 + 128 * 64 + 64 + 64 * 32 + 32 + 32 * 2 + 2
        );
    }

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let spec = ModelSpec::mlp(4, 3, vec![5], 0.0);
        let a = init_params(&spec, 9);
        assert_eq!(a, init_params(&spec, 9));
        assert_ne!(a, init_params(&spec, 10));
        let (w, b) = a.layer(0);
        assert!(b.iter().all(|&v| v == 0.0));
        assert!(w.iter().all(|v| v.abs() < 0.5));
    }

    #[test]
    fn zero_params_give_uniform_probs() {
        let spec = ModelSpec::linear(2, 3);
        let p = Parameters::zeros(&spec);
        let (probs, labels) = predict(&p, &spec, array![[1.0, -2.0], [0.5, 3.0]].view());
        assert!(probs.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(labels, vec![0, 0]);
    }

    #[test]
    fn large_bias_flips_labels() {
        let spec = ModelSpec::linear(2, 2);
        let mut p = init_params(&spec, 1);
        let x = array![[1.0, -2.0], [0.5, 3.0], [-4.0, 0.0]];
        p.theta[2 * 2 + 1] += 1e3; // bias of class 1
        let (_, labels) = predict(&p, &spec, x.view());
        assert_eq!(labels, vec![1, 1, 1]);
    }

    #[test]
    fn clipping() {
        let mut g = vec![3.0, 4.0];
        clip_gradient(&mut g, 0.05);
        assert!((g[0] - 0.03).abs() < 1e-15 && (g[1] - 0.04).abs() < 1e-15);
        let mut small = vec![0.006, 0.008];
        clip_gradient(&mut small, 0.05);
        assert_eq!(small, vec![0.006, 0.008]);
        let mut zero = vec![0.0; 3];
        clip_gradient(&mut zero, 0.05);
        assert_eq!(zero, vec![0.0; 3]);
    }

    #[test]
    fn prior_weights_single_group_is_mean_ce() {
        let spec = ModelSpec::linear(2, 2);
        let p = init_params(&spec, 3);
        let x = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let labels = [0, 1, 1];
        let batch = WeightedBatch {
            features: x.view(),
            labels: &labels,
            groups: &[0, 0, 0],
            weights: &[1.0],
        };
        let loss = weighted_loss(&p, &spec, &batch, None).unwrap();
        let fwd = forward(&p, &spec, x.view(), None);
        let mean: f64 = (0..3).map(|i| -fwd.probs[(i, labels[i])].ln()).sum::<f64>() / 3.0;
        assert!((loss - mean).abs() < 1e-12);
    }

    #[test]
    fn overflow_is_reported() {
        let spec = ModelSpec::linear(1, 2);
        let mut p = Parameters::zeros(&spec);
        p.theta[0] = f64::INFINITY;
        let x = array![[1.0]];
        let batch = WeightedBatch {
            features: x.view(),
            labels: &[1],
            groups: &[0],
            weights: &[1.0],
        };
        assert!(matches!(
            weighted_loss_grad(&p, &spec, &batch, None),
            Err(Error::NonFinite)
        ));
    }

    #[test]
    fn checkpoint_round_trip() {
        let spec = ModelSpec::mlp(3, 2, vec![4], 0.2);
        let ck = Checkpoint {
            params: init_params(&spec, 5),
            spec,
        };
        let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
        assert_eq!(back, ck);
    }

    #[test]
    fn dropout_changes_forward_only_when_seeded() {
        let spec = ModelSpec::mlp(2, 2, vec![16], 0.5);
        let p = init_params(&spec, 2);
        let x = array![[1.0, 2.0], [0.3, -1.0]];
        let a = forward(&p, &spec, x.view(), None);
        let b = forward(&p, &spec, x.view(), Some(1));
        let c = forward(&p, &spec, x.view(), Some(1));
        assert_ne!(a.logits, b.logits);
        assert_eq!(b.logits, c.logits);
    }
}
