//! Hand-differentiated conv/LSTM/dense forecaster.
//!
//! Pipeline: a stack of valid-padded 1-D convolutions (each followed by ReLU),
//! one LSTM returning its full hidden sequence, a flatten, an optional hidden
//! dense layer, and a dense ReLU head producing one value per horizon step.
//! All math is `f64` and single-threaded so runs are bit-reproducible.

mod checkpoint;
mod conv;
mod dense;
mod gradcheck;
mod lstm;
mod model;
mod optim;
mod params;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{GlimmerError, Result};

pub use checkpoint::{load_params, save_params, Checkpoint, FORMAT_VERSION};
pub use conv::{conv1d_backward, conv1d_forward};
pub use dense::{dense_backward, dense_forward};
pub use lstm::{lstm_backward, lstm_forward, LstmTrace};
pub use gradcheck::{check_gradients, GradCheckReport};
pub use model::{
    batch_backward, forward_trace, model_backward, model_forward, predict, ForwardTrace, Gradients,
};
pub use optim::Adam;
pub use params::{ModelParams, TensorSpec};
pub use train::{initial_params, train, EpochRecord, History, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub filters: usize,
    pub kernel: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub conv_layers: Vec<ConvSpec>,
    pub lstm_units: usize,
    /// Width of an optional hidden dense layer before the head; 0 means none.
    pub dense_hidden: usize,
    pub output_len: usize,
    pub input_len: usize,
    pub input_features: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            conv_layers: vec![
                ConvSpec { filters: 32, kernel: 4 },
                ConvSpec { filters: 16, kernel: 4 },
                ConvSpec { filters: 8, kernel: 4 },
            ],
            lstm_units: 8,
            dense_hidden: 0,
            output_len: 12,
            input_len: 72,
            input_features: 6,
        }
    }
}

impl ArchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GlimmerError::Config(m));
        if self.input_len == 0 || self.input_features == 0 || self.output_len == 0 {
            return bad("input_len, input_features and output_len must be >= 1".into());
        }
        if self.lstm_units == 0 {
            return bad("lstm_units must be >= 1".into());
        }
        if let Some(c) = self.conv_layers.iter().find(|c| c.kernel == 0 || c.filters == 0) {
            return bad(format!("conv layer {c:?} needs kernel >= 1 and filters >= 1"));
        }
        let shrink: usize = self.conv_layers.iter().map(|c| c.kernel - 1).sum();
        if shrink >= self.input_len {
            return bad(format!(
                "kernels shrink the sequence by {shrink}, input_len is only {}",
                self.input_len
            ));
        }
        Ok(())
    }

    /// Sequence length reaching the LSTM.
    pub fn seq_len(&self) -> usize {
        self.input_len - self.conv_layers.iter().map(|c| c.kernel - 1).sum::<usize>()
    }

    /// Channels reaching the LSTM.
    pub fn lstm_input_dim(&self) -> usize {
        self.conv_layers
            .last()
            .map_or(self.input_features, |c| c.filters)
    }

    pub fn flattened_dim(&self) -> usize {
        self.seq_len() * self.lstm_units
    }

    /// `(rows, cols)` of every intermediate activation from input to output.
    pub fn shape_chain(&self) -> Vec<(usize, usize)> {
        let mut shapes = vec![(self.input_len, self.input_features)];
        let mut len = self.input_len;
        for c in &self.conv_layers {
            len -= c.kernel - 1;
            shapes.push((len, c.filters));
        }
        shapes.push((len, self.lstm_units));
        shapes.push((1, self.flattened_dim()));
        if self.dense_hidden > 0 {
            shapes.push((1, self.dense_hidden));
        }
        shapes.push((1, self.output_len));
        shapes
    }
}
