//! Versioned JSON checkpoints.
//!
//! ```json
//! {"format_version":1,"arch":{...},"scaler":{...},"thresholds":{...},
//!  "tensors":[{"name":"conv0.weight","shape":[4,6,32],"values":[...]}, ...]}
//! ```
//!
//! Floats are written in shortest round-trip form and parsed with correct
//! rounding, so a save/load cycle is bit-exact.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{ArchConfig, ModelParams};
use crate::data::{Scaler, Thresholds};
use crate::error::{GlimmerError, Result};

pub const FORMAT_VERSION: u32 = 1;

/// A trained model plus the preprocessing it was trained with.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub scaler: Scaler,
    pub thresholds: Thresholds,
}

#[derive(Serialize, Deserialize)]
struct TensorDoc {
    name: String,
    shape: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointDoc {
    format_version: u32,
    arch: ArchConfig,
    scaler: Scaler,
    thresholds: Thresholds,
    tensors: Vec<TensorDoc>,
}

pub fn save_params<W: Write>(ckpt: &Checkpoint, mut sink: W) -> Result<()> {
    let p = &ckpt.params;
    let doc = CheckpointDoc {
        format_version: FORMAT_VERSION,
        arch: p.arch().clone(),
        scaler: ckpt.scaler.clone(),
        thresholds: ckpt.thresholds,
        tensors: p
            .tensors()
            .iter()
            .map(|t| TensorDoc {
                name: t.name.clone(),
                shape: t.shape.clone(),
                values: p.values()[t.range()].to_vec(),
            })
            .collect(),
    };
    serde_json::to_writer(&mut sink, &doc).map_err(|e| GlimmerError::Io(e.into()))?;
    sink.write_all(b"\n")?;
    Ok(())
}

/// Loads a checkpoint. When `expected` is given, the stored architecture must match it.
pub fn load_params<R: Read>(mut source: R, expected: Option<&ArchConfig>) -> Result<Checkpoint> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| GlimmerError::Corrupt(e.to_string()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| GlimmerError::Corrupt(e.to_string()))?;
    let version = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| GlimmerError::Corrupt("missing format_version".into()))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(GlimmerError::Version {
            found: version.try_into().unwrap_or(u32::MAX),
            expected: FORMAT_VERSION,
        });
    }
    let doc: CheckpointDoc =
        serde_json::from_value(value).map_err(|e| GlimmerError::Corrupt(e.to_string()))?;

    if let Some(want) = expected {
        if *want != doc.arch {
            return Err(GlimmerError::shape(format!(
                "checkpoint architecture {:?} does not match requested {:?}",
                doc.arch, want
            )));
        }
    }
    doc.arch
        .validate()
        .map_err(|e| GlimmerError::shape(e.to_string()))?;
    let mut params = ModelParams::zeros(&doc.arch)?;
    if doc.tensors.len() != params.tensors().len() {
        return Err(GlimmerError::shape(format!(
            "checkpoint has {} tensors, architecture needs {}",
            doc.tensors.len(),
            params.tensors().len()
        )));
    }
    let specs = params.tensors().to_vec();
    for (spec, t) in specs.iter().zip(doc.tensors) {
        if spec.name != t.name || spec.shape != t.shape || t.values.len() != spec.len() {
            return Err(GlimmerError::shape(format!(
                "tensor `{}` {:?} ({} values) does not match expected `{}` {:?}",
                t.name,
                t.shape,
                t.values.len(),
                spec.name,
                spec.shape
            )));
        }
        params.values_mut()[spec.range()].copy_from_slice(&t.values);
    }
    if doc.scaler.mean.len() != doc.arch.input_features
        || doc.scaler.std.len() != doc.arch.input_features
    {
        return Err(GlimmerError::shape("scaler width differs from input_features"));
    }
    Ok(Checkpoint {
        params,
        scaler: doc.scaler,
        thresholds: doc.thresholds,
    })
}
