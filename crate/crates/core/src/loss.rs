//! Region-weighted mean absolute error and the plain MAE baseline.
//!
//! For truths partitioned by glycemic region (decided by the *true* value), the
//! weighted loss is
//!
//! ```text
//! L = sum over non-empty regions r of (w_r / n_r) * sum_{i in r} |y_i - yhat_i|
//! ```
//!
//! so each region contributes its own MAE scaled by its weight. Regions with no
//! samples in the pooled set contribute nothing.

use serde::{Deserialize, Serialize};

use crate::data::{classify_region, Thresholds};
use crate::error::{GlimmerError, Result};

/// Per-region weights. The normal band is the reference and stays at 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub w_hypo: f64,
    pub w_normal: f64,
    pub w_hyper: f64,
}

impl LossWeights {
    pub fn new(w_hypo: f64, w_hyper: f64) -> Self {
        LossWeights {
            w_hypo,
            w_normal: 1.0,
            w_hyper,
        }
    }

    pub fn uniform() -> Self {
        LossWeights::new(1.0, 1.0)
    }

    fn as_array(&self) -> [f64; 3] {
        [self.w_hypo, self.w_normal, self.w_hyper]
    }

    pub fn validate(&self) -> Result<()> {
        if self.as_array().iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(GlimmerError::Config(format!(
                "loss weights must be finite and positive: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Loss value together with how many elements fell in each region (hypo, normal, hyper).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionLoss {
    pub value: f64,
    pub counts: [usize; 3],
}

fn check_lengths(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(GlimmerError::domain(format!(
            "{} predictions for {} targets",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(GlimmerError::domain("loss of an empty batch"));
    }
    Ok(())
}

fn region_indices(truth: &[f64], t: &Thresholds) -> Result<(Vec<usize>, [usize; 3])> {
    let mut counts = [0usize; 3];
    let idx = truth
        .iter()
        .map(|&y| {
            let r = classify_region(y, t)?.index();
            counts[r] += 1;
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((idx, counts))
}

pub fn weighted_region_loss(
    pred: &[f64],
    truth: &[f64],
    w: &LossWeights,
    t: &Thresholds,
) -> Result<RegionLoss> {
    check_lengths(pred, truth)?;
    let (regions, counts) = region_indices(truth, t)?;
    let mut sums = [0.0; 3];
    for ((p, y), r) in pred.iter().zip(truth).zip(&regions) {
        sums[*r] += (y - p).abs();
    }
    let weights = w.as_array();
    let value = (0..3)
        .filter(|&r| counts[r] > 0)
        .map(|r| weights[r] / counts[r] as f64 * sums[r])
        .sum();
    Ok(RegionLoss { value, counts })
}

/// d loss / d pred. Uses sign(0) = 0 at the kink.
pub fn weighted_region_loss_grad(
    pred: &[f64],
    truth: &[f64],
    w: &LossWeights,
    t: &Thresholds,
) -> Result<Vec<f64>> {
    check_lengths(pred, truth)?;
    let (regions, counts) = region_indices(truth, t)?;
    let weights = w.as_array();
    Ok(pred
        .iter()
        .zip(truth)
        .zip(&regions)
        .map(|((p, y), &r)| weights[r] / counts[r] as f64 * sign(p - y))
        .collect())
}

pub fn mae_loss(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(pred, truth)?;
    Ok(pred.iter().zip(truth).map(|(p, y)| (y - p).abs()).sum::<f64>() / pred.len() as f64)
}

pub fn mae_loss_grad(pred: &[f64], truth: &[f64]) -> Result<Vec<f64>> {
    check_lengths(pred, truth)?;
    let n = pred.len() as f64;
    Ok(pred.iter().zip(truth).map(|(p, y)| sign(p - y) / n).collect())
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Training objective applied to the pooled scalar targets of a batch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Objective {
    /// Global MAE, the unweighted baseline.
    Mae,
    RegionWeighted {
        weights: LossWeights,
        thresholds: Thresholds,
    },
}

impl Objective {
    pub fn region_weighted(w_hypo: f64, w_hyper: f64, thresholds: Thresholds) -> Self {
        Objective::RegionWeighted {
            weights: LossWeights::new(w_hypo, w_hyper),
            thresholds,
        }
    }

    pub fn value(&self, pred: &[f64], truth: &[f64]) -> Result<f64> {
        match self {
            Objective::Mae => mae_loss(pred, truth),
            Objective::RegionWeighted {
                weights,
                thresholds,
            } => Ok(weighted_region_loss(pred, truth, weights, thresholds)?.value),
        }
    }

    pub fn gradient(&self, pred: &[f64], truth: &[f64]) -> Result<Vec<f64>> {
        match self {
            Objective::Mae => mae_loss_grad(pred, truth),
            Objective::RegionWeighted {
                weights,
                thresholds,
            } => weighted_region_loss_grad(pred, truth, weights, thresholds),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Objective::Mae => Ok(()),
            Objective::RegionWeighted {
                weights,
                thresholds,
            } => {
                weights.validate()?;
                thresholds.validate()
            }
        }
    }
}
