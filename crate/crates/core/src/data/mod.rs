//! CGM ingestion, feature crafting, windowing, splitting and scaling.
//!
//! The flow used by training and evaluation is
//! `records -> build_features -> chronological_split -> make_windows -> Scaler`.
//! Targets stay in mg/dL throughout; only the model inputs are normalized.

mod csv_io;
mod features;
mod scaler;
mod split;
mod synth;
mod window;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{GlimmerError, Result};

pub use csv_io::{parse_csv, read_csv_file, write_csv, CSV_HEADER};
pub use features::{build_features, moving_average, FeatureRow, MOVING_AVERAGE_PERIOD, N_FEATURES};
pub use scaler::{apply_scaler, fit_scaler, Scaler};
pub use split::chronological_split;
pub use synth::generate_synthetic;
pub use window::{make_windows, WindowConfig, WindowSample};

/// Nominal CGM sampling interval.
pub const SAMPLE_INTERVAL_SECS: i64 = 300;

/// One timestamped sensor/pump sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CgmRecord {
    pub timestamp: DateTime<Utc>,
    /// mg/dL
    pub glucose: f64,
    /// U/h
    pub basal: f64,
    /// U
    pub bolus: f64,
    /// g
    pub carbs: f64,
}

/// Glycemic region thresholds in mg/dL.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub t_hypo: f64,
    pub t_hyper: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            t_hypo: 70.0,
            t_hyper: 180.0,
        }
    }
}

impl Thresholds {
    pub fn new(t_hypo: f64, t_hyper: f64) -> Result<Self> {
        let t = Thresholds { t_hypo, t_hyper };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_hypo.is_finite() && self.t_hyper.is_finite())
            || self.t_hypo <= 0.0
            || self.t_hypo >= self.t_hyper
        {
            return Err(GlimmerError::Config(format!(
                "thresholds must satisfy 0 < t_hypo < t_hyper (got {} and {})",
                self.t_hypo, self.t_hyper
            )));
        }
        Ok(())
    }
}

/// Glycemic region. The discriminants are the ordinal labels used as a model feature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Region {
    Hypo = 1,
    Normal = 2,
    Hyper = 3,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Hypo, Region::Normal, Region::Hyper];

    pub fn label(self) -> u8 {
        self as u8
    }

    /// Zero-based index, handy for per-region arrays.
    pub fn index(self) -> usize {
        self as usize - 1
    }
}

/// Maps a glucose value to its region. Both thresholds belong to the normal band.
pub fn classify_region(glucose: f64, t: &Thresholds) -> Result<Region> {
    if !glucose.is_finite() {
        return Err(GlimmerError::domain(format!(
            "cannot classify non-finite glucose {glucose}"
        )));
    }
    Ok(if glucose < t.t_hypo {
        Region::Hypo
    } else if glucose <= t.t_hyper {
        Region::Normal
    } else {
        Region::Hyper
    })
}
