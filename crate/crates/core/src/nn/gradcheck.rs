//! Central finite-difference check of the analytic gradients.

use super::model::{batch_backward, forward_trace};
use super::ModelParams;
use crate::error::Result;
use crate::loss::Objective;
use crate::matrix::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Coordinate with the largest relative error.
    pub worst_index: usize,
    pub checked: usize,
    /// Coordinates skipped because a ReLU or |.| switched sides within ±h.
    pub excluded: usize,
}

/// Sign pattern of every piecewise-linear switch: ReLU inputs and prediction residuals.
fn kink_pattern(p: &ModelParams, batch: &[(&Matrix, &[f64])]) -> Result<Vec<i8>> {
    let mut pattern = Vec::new();
    for (x, y) in batch {
        let tr = forward_trace(p, x)?;
        pattern.extend(tr.relu_inputs().map(|z| (z > 0.0) as i8));
        pattern.extend(tr.output.iter().zip(*y).map(|(o, t)| (o - t).signum() as i8));
    }
    Ok(pattern)
}

/// Compares every analytic gradient coordinate with `(L(θ+h) − L(θ−h)) / 2h`.
///
/// Relative error is `|a − n| / max(|a|, |n|, floor)`; the floor keeps near-zero
/// gradients from turning roundoff into large ratios.
pub fn check_gradients(
    params: &ModelParams,
    batch: &[(&Matrix, &[f64])],
    objective: &Objective,
    h: f64,
    floor: f64,
) -> Result<GradCheckReport> {
    let (_, analytic) = batch_backward(params, batch, objective)?;
    let base_pattern = kink_pattern(params, batch)?;
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        checked: 0,
        excluded: 0,
    };
    for i in 0..params.len() {
        let orig = params.values()[i];
        probe.values_mut()[i] = orig + h;
        let plus_pattern = kink_pattern(&probe, batch)?;
        let (plus, _) = batch_backward(&probe, batch, objective)?;
        probe.values_mut()[i] = orig - h;
        let minus_pattern = kink_pattern(&probe, batch)?;
        let (minus, _) = batch_backward(&probe, batch, objective)?;
        probe.values_mut()[i] = orig;

        if plus_pattern != base_pattern || minus_pattern != base_pattern {
            report.excluded += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_index = i;
        }
        report.checked += 1;
    }
    Ok(report)
}
