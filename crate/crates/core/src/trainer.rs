//! The reweighting training loop.
//!
//! Per batch: forward pass, per-group error rates from the batch
//! predictions, fairness levels from the running estimates, one ascent step
//! on the multipliers, group weights from the multipliers, one clipped SGD
//! step on the weighted cross-entropy. Validation accuracy and exact
//! validation fairness are recorded after every epoch, and the final model
//! is picked from those checkpoints with the β-window rule.

use ndarray::Axis;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::fairness::{
    self, build_constants, direct_fairness, fairness_levels, group_error_rates, ConstantMatrix,
    FairnessNotion, GroupErrorEstimates, GroupKey,
};
use crate::model::{self, Architecture, ModelSpec, Parameters, WeightedBatch};
use crate::rng::{self, stream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MultiplierMode {
    Exact,
    Epsilon { epsilon: f64 },
}

/// Lagrange multipliers. In exact mode only `lambda` is used and it is
/// unconstrained in sign. In epsilon mode `lambda` (upper constraint
/// `F ≤ ε`) and `delta` (lower constraint `F ≥ -ε`) stay non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierState {
    pub mode: MultiplierMode,
    pub lambda: Vec<f64>,
    pub delta: Vec<f64>,
}

impl MultiplierState {
    pub fn exact(k: usize) -> Self {
        MultiplierState {
            mode: MultiplierMode::Exact,
            lambda: vec![0.0; k],
            delta: vec![0.0; k],
        }
    }

    pub fn epsilon(k: usize, epsilon: f64) -> Self {
        MultiplierState {
            mode: MultiplierMode::Epsilon { epsilon },
            lambda: vec![0.0; k],
            delta: vec![0.0; k],
        }
    }

    /// The multiplier that enters the group weights: `λ` or `λ - δ`.
    pub fn effective(&self) -> Vec<f64> {
        match self.mode {
            MultiplierMode::Exact => self.lambda.clone(),
            MultiplierMode::Epsilon { .. } => self
                .lambda
                .iter()
                .zip(&self.delta)
                .map(|(l, d)| l - d)
                .collect(),
        }
    }

    pub fn update(&mut self, fairness: &[f64], eta: f64) {
        match self.mode {
            MultiplierMode::Exact => update_multipliers_exact(self, fairness, eta),
            MultiplierMode::Epsilon { .. } => update_multipliers_eps(self, fairness, eta),
        }
    }
}

/// `λ_k += η F_k`
pub fn update_multipliers_exact(state: &mut MultiplierState, fairness: &[f64], eta: f64) {
    assert_eq!(state.mode, MultiplierMode::Exact);
    assert_eq!(fairness.len(), state.lambda.len());
    for (l, f) in state.lambda.iter_mut().zip(fairness) {
        *l += eta * f;
    }
}

/// `λ_k = max(0, λ_k + η (F_k - ε))`, `δ_k = max(0, δ_k - η (F_k + ε))`
pub fn update_multipliers_eps(state: &mut MultiplierState, fairness: &[f64], eta: f64) {
    let MultiplierMode::Epsilon { epsilon } = state.mode else {
        panic!("update_multipliers_eps called on an exact-mode state");
    };
    assert_eq!(fairness.len(), state.lambda.len());
    for ((l, d), f) in state.lambda.iter_mut().zip(&mut state.delta).zip(fairness) {
        *l = (*l + eta * (f - epsilon)).max(0.0);
        *d = (*d - eta * (f + epsilon)).max(0.0);
    }
}

/// `w_k = P(T_k) + Σ_k' C[k'][k] μ_k'` with `μ` the effective multipliers.
pub fn group_weights(priors: &[f64], c: &ConstantMatrix, state: &MultiplierState) -> Vec<f64> {
    let shift = c.mul_vec_transposed(&state.effective());
    priors.iter().zip(shift).map(|(p, s)| p + s).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainMode {
    /// Plain ERM: group weights frozen at the priors.
    Unconstrained,
    FairGradExact,
    FairGradEpsilon {
        epsilon: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub eta_theta: f64,
    pub eta_lambda: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub clip_norm: f64,
    pub seed: u64,
    pub mode: TrainMode,
    pub beta: f64,
    /// Clamp group weights at zero before the gradient step (ablation).
    pub clip_weights_nonnegative: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            architecture: Architecture::Linear,
            eta_theta: 0.1,
            eta_lambda: 0.01,
            batch_size: 64,
            epochs: 50,
            clip_norm: 0.05,
            seed: 0,
            mode: TrainMode::FairGradExact,
            beta: 0.03,
            clip_weights_nonnegative: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.eta_theta > 0.0 && self.eta_theta.is_finite()) {
            return bad(format!(
                "model learning rate must be > 0, got {}",
                self.eta_theta
            ));
        }
        if !(self.eta_lambda > 0.0 && self.eta_lambda.is_finite()) {
            return bad(format!(
                "multiplier learning rate must be > 0, got {}",
                self.eta_lambda
            ));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return bad("batch size and epochs must be positive".into());
        }
        if !(self.clip_norm > 0.0) {
            return bad(format!("clip norm must be > 0, got {}", self.clip_norm));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be >= 0, got {}", self.beta));
        }
        if let TrainMode::FairGradEpsilon { epsilon } = self.mode {
            if !(epsilon >= 0.0 && epsilon.is_finite()) {
                return bad(format!("epsilon must be >= 0, got {epsilon}"));
            }
        }
        Ok(())
    }

    fn multipliers(&self, k: usize) -> Option<MultiplierState> {
        match self.mode {
            TrainMode::Unconstrained => None,
            TrainMode::FairGradExact => Some(MultiplierState::exact(k)),
            TrainMode::FairGradEpsilon { epsilon } => Some(MultiplierState::epsilon(k, epsilon)),
        }
    }
}

/// State at the end of one completed epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub params: Parameters,
    pub val_accuracy: f64,
    pub val_fairness: Vec<f64>,
    pub val_mean_abs: f64,
    pub weights: Vec<f64>,
    pub lambda: Vec<f64>,
    pub delta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub group_keys: Vec<GroupKey>,
    pub records: Vec<EpochRecord>,
}

/// What the loop saw at one batch, after the multiplier update and before
/// the parameter step.
#[derive(Debug, Clone, Copy)]
pub struct StepInfo<'a> {
    pub epoch: usize,
    pub batch: usize,
    pub loss: f64,
    /// Fairness levels from the running estimates (empty when unconstrained).
    pub fairness: &'a [f64],
    pub lambda: &'a [f64],
    pub delta: &'a [f64],
    pub weights: &'a [f64],
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub spec: ModelSpec,
    pub history: TrainHistory,
    pub selected_epoch: usize,
    pub priors: Vec<f64>,
    pub constants: ConstantMatrix,
}

impl TrainOutcome {
    pub fn selected_params(&self) -> &Parameters {
        &self.history.records[self.selected_epoch].params
    }

    pub fn final_params(&self) -> &Parameters {
        &self
            .history
            .records
            .last()
            .expect("at least one epoch")
            .params
    }
}

pub fn train(
    config: &TrainConfig,
    train: &Dataset,
    val: &Dataset,
    notion: &FairnessNotion,
) -> Result<TrainOutcome> {
    train_with_observer(config, train, val, notion, |_| {})
}

pub fn train_with_observer<F>(
    config: &TrainConfig,
    train: &Dataset,
    val: &Dataset,
    notion: &FairnessNotion,
    mut observe: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&StepInfo<'_>),
{
    config.validate()?;
    let distinct_labels = {
        let mut seen = vec![false; train.label_count()];
        train.labels().iter().for_each(|&y| seen[y] = true);
        seen.iter().filter(|&&s| s).count()
    };
    if distinct_labels < 2 {
        return Err(Error::data("training set contains a single label"));
    }
    if val.dim() != train.dim()
        || val.label_count() != train.label_count()
        || val.sensitive_count() != train.sensitive_count()
    {
        return Err(Error::data(
            "validation set does not match the training set layout",
        ));
    }
    let part = fairness::partition(train, notion)?;
    let constants = build_constants(&part, notion, train);
    let k = part.k();
    let spec = ModelSpec {
        architecture: config.architecture.clone(),
        input_dim: train.dim(),
        class_count: train.label_count(),
    };
    spec.validate()?;

    let mut params = model::init_params(&spec, config.seed);
    let mut multipliers = config.multipliers(k);
    let mut estimates = GroupErrorEstimates::new(k);
    let mut dropout_rng = rng::stream_rng(config.seed, stream::DROPOUT);
    let has_dropout =
        matches!(&spec.architecture, Architecture::Mlp { dropout, .. } if *dropout > 0.0);
    let mut weights = part.priors.clone();
    let mut fairness = Vec::new();
    let zeros = vec![0.0; k];

    let mut history = TrainHistory {
        group_keys: part.keys.clone(),
        records: Vec::with_capacity(config.epochs),
    };
    let x = train.features();
    for epoch in 0..config.epochs {
        let mut shuffle_rng = rng::stream_rng(config.seed, stream::SHUFFLE + epoch as u64);
        let order = rng::permutation(train.len(), &mut shuffle_rng);
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let xb = x.select(Axis(0), chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| train.labels()[i]).collect();
            let gb: Vec<usize> = chunk.iter().map(|&i| part.group_of[i]).collect();
            let dropout_seed = has_dropout.then(|| dropout_rng.next_u64());
            let fwd = model::forward(&params, &spec, xb.view(), dropout_seed);

            if let Some(state) = multipliers.as_mut() {
                let batch_err = group_error_rates(&fwd.labels(), &yb, &gb, k);
                estimates.update(&batch_err);
                fairness = fairness_levels(&constants, &estimates.rates);
                state.update(&fairness, config.eta_lambda);
                weights = group_weights(&part.priors, &constants, state);
            }
            let step_weights: Vec<f64> = if config.clip_weights_nonnegative {
                weights.iter().map(|w| w.max(0.0)).collect()
            } else {
                weights.clone()
            };
            let batch = WeightedBatch {
                features: xb.view(),
                labels: &yb,
                groups: &gb,
                weights: &step_weights,
            };
            let (loss, mut grad) = model::backward(&params, &fwd, &batch).map_err(|e| match e {
                Error::NonFinite => Error::NonFiniteLoss { epoch, batch: b },
                other => other,
            })?;
            observe(&StepInfo {
                epoch,
                batch: b,
                loss,
                fairness: &fairness,
                lambda: multipliers.as_ref().map_or(&zeros[..], |m| &m.lambda[..]),
                delta: multipliers.as_ref().map_or(&zeros[..], |m| &m.delta[..]),
                weights: &step_weights,
            });
            model::clip_gradient(&mut grad, config.clip_norm);
            for (t, g) in params.theta.iter_mut().zip(&grad) {
                *t -= config.eta_theta * g;
            }
        }

        let (_, val_pred) = model::predict(&params, &spec, val.features().view());
        let val_accuracy = accuracy(&val_pred, val.labels());
        let val_fairness = direct_fairness(
            &val_pred,
            val.labels(),
            val.sensitive(),
            notion,
            val.label_count(),
            val.sensitive_count(),
        )?;
        let val_mean_abs = mean_abs(&val_fairness);
        history.records.push(EpochRecord {
            epoch,
            params: params.clone(),
            val_accuracy,
            val_fairness,
            val_mean_abs,
            weights: weights.clone(),
            lambda: multipliers
                .as_ref()
                .map_or(zeros.clone(), |m| m.lambda.clone()),
            delta: multipliers
                .as_ref()
                .map_or(zeros.clone(), |m| m.delta.clone()),
        });
    }

    let selected_epoch = select_model(&history.records, config.beta);
    Ok(TrainOutcome {
        spec,
        history,
        selected_epoch,
        priors: part.priors,
        constants,
    })
}

pub fn accuracy(predictions: &[usize], labels: &[usize]) -> f64 {
    let correct = predictions
        .iter()
        .zip(labels)
        .filter(|(p, y)| p == y)
        .count();
    correct as f64 / labels.len() as f64
}

pub fn mean_abs(f: &[f64]) -> f64 {
    f.iter().map(|v| v.abs()).sum::<f64>() / f.len() as f64
}

/// β-window selection: with `α*` the best validation accuracy, return the
/// record with the lowest mean absolute validation fairness among those
/// with accuracy in `[α* - β, α*]` (earliest on ties). The lower bound is
/// widened by 1e-12 so accuracies sitting on the boundary are kept.
pub fn select_model(records: &[EpochRecord], beta: f64) -> usize {
    assert!(!records.is_empty(), "cannot select from an empty history");
    let best = records
        .iter()
        .map(|r| r.val_accuracy)
        .fold(f64::NEG_INFINITY, f64::max);
    let floor = best - beta - 1e-12;
    let mut chosen: Option<usize> = None;
    for (i, r) in records.iter().enumerate() {
        if r.val_accuracy < floor {
            continue;
        }
        if chosen.is_none_or(|c| r.val_mean_abs < records[c].val_mean_abs) {
            chosen = Some(i);
        }
    }
    chosen.expect("the best record is always inside the window")
}

/// Linear model that always predicts the majority training label (lowest
/// code on ties).
pub fn constant_baseline(train: &Dataset) -> (ModelSpec, Parameters) {
    let mut counts = vec![0usize; train.label_count()];
    train.labels().iter().for_each(|&y| counts[y] += 1);
    let majority = counts
        .iter()
        .enumerate()
        .fold(0, |best, (i, &c)| if c > counts[best] { i } else { best });
    let spec = ModelSpec::linear(train.dim(), train.label_count().max(2));
    let mut params = Parameters::zeros(&spec);
    let bias_offset = spec.input_dim * spec.class_count;
    params.theta[bias_offset + majority] = 1.0;
    (spec, params)
}
