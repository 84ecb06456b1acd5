use serde::{Deserialize, Serialize};

use super::{classify_region, CgmRecord, Thresholds};
use crate::error::{GlimmerError, Result};

pub const N_FEATURES: usize = 6;
pub const MOVING_AVERAGE_PERIOD: usize = 200;

/// Model input features for one time step, in fixed order:
/// glucose, basal, bolus, carbs, glucose moving average, region label (1/2/3).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow(pub [f64; N_FEATURES]);

impl FeatureRow {
    pub const GLUCOSE: usize = 0;
    pub const BASAL: usize = 1;
    pub const BOLUS: usize = 2;
    pub const CARBS: usize = 3;
    pub const MOVING_AVG: usize = 4;
    pub const REGION: usize = 5;

    pub fn glucose(&self) -> f64 {
        self.0[Self::GLUCOSE]
    }
}

/// Trailing mean over `period` samples; the first `period - 1` outputs use an expanding window.
pub fn moving_average(series: &[f64], period: usize) -> Result<Vec<f64>> {
    if period == 0 {
        return Err(GlimmerError::domain("moving average period must be >= 1"));
    }
    if series.is_empty() {
        return Err(GlimmerError::domain("moving average of an empty series"));
    }
    Ok((0..series.len())
        .map(|i| {
            let window = &series[(i + 1).saturating_sub(period)..=i];
            // Summing deviations from the first element keeps constant runs exact.
            let anchor = window[0];
            let dev: f64 = window.iter().map(|v| v - anchor).sum();
            anchor + dev / window.len() as f64
        })
        .collect())
}

pub fn build_features(records: &[CgmRecord], t: &Thresholds) -> Result<Vec<FeatureRow>> {
    if records.is_empty() {
        return Ok(Vec::new());
    }
    let glucose: Vec<f64> = records.iter().map(|r| r.glucose).collect();
    let avg = moving_average(&glucose, MOVING_AVERAGE_PERIOD)?;
    records
        .iter()
        .zip(avg)
        .map(|(r, ma)| {
            let region = classify_region(r.glucose, t)?;
            Ok(FeatureRow([
                r.glucose,
                r.basal,
                r.bolus,
                r.carbs,
                ma,
                f64::from(region.label()),
            ]))
        })
        .collect()
}
