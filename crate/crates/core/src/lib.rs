//! Glucose forecasting with a region-weighted loss.
//!
//! A compact conv/LSTM forecaster predicts the next hour of CGM readings from six
//! hours of history. Training minimizes a loss that weights the mean absolute error
//! in the hypo- and hyperglycemic bands separately from the normal band; the two
//! weights are searched with a small genetic algorithm. Evaluation covers RMSE/MAE,
//! per-region slices, event classification scores and the Clarke Error Grid.

pub mod data;
pub mod error;
pub mod eval;
pub mod ga;
pub mod loss;
pub mod matrix;
pub mod nn;
pub mod pipeline;

pub use error::{GlimmerError, Result};
