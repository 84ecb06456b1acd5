use serde::{Deserialize, Serialize};

use super::WindowSample;
use crate::error::{GlimmerError, Result};

/// Per-feature z-score parameters fitted on training windows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    pub fn identity(n_features: usize) -> Self {
        Scaler {
            mean: vec![0.0; n_features],
            std: vec![1.0; n_features],
        }
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    /// Normalizes one feature row in place.
    pub fn transform_row(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
    }
}

/// Population mean/std over every input row of every training window.
/// Columns with zero spread get std 1.
pub fn fit_scaler(train: &[WindowSample]) -> Result<Scaler> {
    let first = train
        .first()
        .ok_or_else(|| GlimmerError::domain("cannot fit a scaler on an empty training set"))?;
    let n_features = first.x.cols();
    let mut count = 0usize;
    let mut sum = vec![0.0; n_features];
    for w in train {
        if w.x.cols() != n_features {
            return Err(GlimmerError::shape("windows disagree on feature count"));
        }
        for r in 0..w.x.rows() {
            for (s, v) in sum.iter_mut().zip(w.x.row(r)) {
                *s += v;
            }
        }
        count += w.x.rows();
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();

    let mut sq = vec![0.0; n_features];
    for w in train {
        for r in 0..w.x.rows() {
            for ((acc, v), m) in sq.iter_mut().zip(w.x.row(r)).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
    }
    let std = sq
        .iter()
        .map(|s| {
            let sd = (s / count as f64).sqrt();
            if sd > 1e-12 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    Ok(Scaler { mean, std })
}

pub fn apply_scaler(scaler: &Scaler, windows: &[WindowSample]) -> Result<Vec<WindowSample>> {
    windows
        .iter()
        .map(|w| {
            if w.x.cols() != scaler.n_features() {
                return Err(GlimmerError::shape(format!(
                    "scaler has {} features, window has {}",
                    scaler.n_features(),
                    w.x.cols()
                )));
            }
            let mut out = w.clone();
            for r in 0..out.x.rows() {
                scaler.transform_row(out.x.row_mut(r));
            }
            Ok(out)
        })
        .collect()
}
