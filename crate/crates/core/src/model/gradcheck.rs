//! Central finite differences for checking analytic gradients.

use super::{weighted_loss, weighted_loss_grad, ModelSpec, Parameters, WeightedBatch};
use crate::Result;

/// `(f(θ + h e_i) - f(θ - h e_i)) / 2h` for each coordinate `i` in `coords`.
pub fn central_differences<F>(
    mut f: F,
    theta: &[f64],
    coords: &[usize],
    step: f64,
) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut probe = theta.to_vec();
    coords
        .iter()
        .map(|&i| {
            let orig = probe[i];
            probe[i] = orig + step;
            let up = f(&probe)?;
            probe[i] = orig - step;
            let down = f(&probe)?;
            probe[i] = orig;
            Ok((up - down) / (2.0 * step))
        })
        .collect()
}

/// `|a - n| / max(|a|, |n|)`, or the absolute error when both are below 1e-6.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-6 {
        diff
    } else {
        diff / scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub worst_coord: usize,
    pub analytic: f64,
    pub numeric: f64,
    /// Coordinates skipped because `θ ± h` lands on different sides of a
    /// ReLU kink, where the central difference is not a derivative.
    pub kinks: usize,
}

/// Sign pattern of every hidden pre-activation over the batch.
fn relu_pattern(params: &Parameters, spec: &ModelSpec, batch: &WeightedBatch<'_>) -> Vec<bool> {
    let fwd = super::forward(params, spec, batch.features, None);
    fwd.inputs[1..]
        .iter()
        .flat_map(|a| a.iter().map(|&v| v > 0.0).collect::<Vec<_>>())
        .collect()
}

/// Compares `weighted_loss_grad` against central differences of
/// `weighted_loss` at `coords` (dropout off).
pub fn check_weighted_loss(
    params: &Parameters,
    spec: &ModelSpec,
    batch: &WeightedBatch<'_>,
    coords: &[usize],
    step: f64,
) -> Result<GradCheck> {
    let (_, grad) = weighted_loss_grad(params, spec, batch, None)?;
    let mut probe = params.clone();
    let numeric = central_differences(
        |theta| {
            probe.theta.copy_from_slice(theta);
            weighted_loss(&probe, spec, batch, None)
        },
        &params.theta,
        coords,
        step,
    )?;
    let mut worst = GradCheck {
        max_rel_error: 0.0,
        worst_coord: 0,
        analytic: 0.0,
        numeric: 0.0,
        kinks: 0,
    };
    for (&i, &n) in coords.iter().zip(&numeric) {
        if crosses_kink(params, spec, batch, i, step) {
            worst.kinks += 1;
            continue;
        }
        let e = relative_error(grad[i], n);
        if e >= worst.max_rel_error {
            worst = GradCheck {
                max_rel_error: e,
                worst_coord: i,
                analytic: grad[i],
                numeric: n,
                kinks: worst.kinks,
            };
        }
    }
    Ok(worst)
}

fn crosses_kink(
    params: &Parameters,
    spec: &ModelSpec,
    batch: &WeightedBatch<'_>,
    coord: usize,
    step: f64,
) -> bool {
    if params.layers.len() < 2 {
        return false;
    }
    let mut probe = params.clone();
    probe.theta[coord] += step;
    let up = relu_pattern(&probe, spec, batch);
    probe.theta[coord] = params.theta[coord] - step;
    up != relu_pattern(&probe, spec, batch)
}
