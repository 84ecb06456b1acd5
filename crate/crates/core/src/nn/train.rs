use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::batch_backward;
use super::{model_forward, Adam, ArchConfig, ModelParams};
use crate::data::WindowSample;
use crate::error::{GlimmerError, Result};
use crate::loss::Objective;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub objective: Objective,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 48,
            epochs: 30,
            learning_rate: 1e-3,
            seed: 0,
            objective: Objective::Mae,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(GlimmerError::Config("batch_size and epochs must be >= 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(GlimmerError::Config("learning_rate must be positive".into()));
        }
        self.objective.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean of the per-batch losses.
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct History {
    /// Validation loss of the freshly initialized model.
    pub initial_val_loss: f64,
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were returned.
    pub best_epoch: usize,
    pub optimizer_steps: u64,
}

impl History {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss\n");
        for e in &self.epochs {
            s.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, e.val_loss));
        }
        s
    }
}

/// Objective evaluated over all validation targets pooled together.
fn validation_loss(p: &ModelParams, val: &[WindowSample], objective: &Objective) -> Result<f64> {
    let mut preds = Vec::new();
    let mut truth = Vec::new();
    for w in val {
        preds.extend(model_forward(p, &w.x)?);
        truth.extend_from_slice(&w.y);
    }
    objective.value(&preds, &truth)
}

fn numeric(epoch: usize) -> impl Fn(GlimmerError) -> GlimmerError {
    move |e| match e {
        GlimmerError::NonFinite(message) => GlimmerError::Numeric { epoch, message },
        other => other,
    }
}

fn init_with(train: &[WindowSample], arch: &ArchConfig, rng: &mut ChaCha8Rng) -> Result<ModelParams> {
    let mut params = ModelParams::init_uniform(arch, rng)?;
    let n_targets: usize = train.iter().map(|w| w.y.len()).sum();
    if n_targets == 0 {
        return Err(GlimmerError::domain("training set has no targets"));
    }
    let mean_target = train.iter().flat_map(|w| &w.y).sum::<f64>() / n_targets as f64;
    params
        .tensor_by_name_mut("head.bias")
        .expect("head bias")
        .fill(mean_target);
    Ok(params)
}

/// The parameters [`train`] starts from for a given seed. They do not depend on the objective.
pub fn initial_params(train: &[WindowSample], arch: &ArchConfig, seed: u64) -> Result<ModelParams> {
    init_with(train, arch, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Trains from a seeded initialization on normalized windows and returns the
/// parameters of the epoch with the lowest validation loss.
///
/// Weights start at U(±sqrt(1/fan_in)), biases at zero except the head bias,
/// which starts at the mean training target so the ReLU head is live from step one.
/// The training set is reshuffled every epoch; the last short batch is kept.
pub fn train(
    train: &[WindowSample],
    val: &[WindowSample],
    arch: &ArchConfig,
    cfg: &TrainConfig,
) -> Result<(ModelParams, History)> {
    cfg.validate()?;
    arch.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(GlimmerError::domain(format!(
            "training needs non-empty train and validation sets (got {} and {})",
            train.len(),
            val.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let params = init_with(train, arch, &mut rng)?;

    let initial_val_loss = validation_loss(&params, val, &cfg.objective).map_err(numeric(0))?;
    let mut params = params;
    let mut opt = Adam::new(params.len());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut records = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut n_batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<_> = chunk
                .iter()
                .map(|&i| (&train[i].x, train[i].y.as_slice()))
                .collect();
            let (loss, grads) = batch_backward(&params, &batch, &cfg.objective).map_err(numeric(epoch))?;
            opt.step(params.values_mut(), &grads, cfg.learning_rate);
            loss_sum += loss;
            n_batches += 1;
        }
        if !params.all_finite() {
            return Err(GlimmerError::Numeric {
                epoch,
                message: "parameters became non-finite".into(),
            });
        }
        let val_loss = validation_loss(&params, val, &cfg.objective).map_err(numeric(epoch))?;
        records.push(EpochRecord {
            epoch,
            train_loss: loss_sum / n_batches as f64,
            val_loss,
        });
        if best.as_ref().is_none_or(|(b, _, _)| val_loss < *b) {
            best = Some((val_loss, epoch, params.clone()));
        }
    }

    let (_, best_epoch, best_params) = best.expect("at least one epoch");
    Ok((
        best_params,
        History {
            initial_val_loss,
            epochs: records,
            best_epoch,
            optimizer_steps: opt.steps(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::nn::ConvSpec;
    use chrono::{TimeZone, Utc};

    fn tiny_arch() -> ArchConfig {
        ArchConfig {
            conv_layers: vec![ConvSpec { filters: 3, kernel: 3 }],
            lstm_units: 2,
            dense_hidden: 0,
            output_len: 3,
            input_len: 8,
            input_features: 2,
        }
    }

    fn windows(n: usize, target: impl Fn(usize) -> f64) -> Vec<WindowSample> {
        (0..n)
            .map(|i| {
                let x: Vec<f64> = (0..16).map(|k| ((i * 16 + k) as f64 * 0.37).sin()).collect();
                WindowSample {
                    x: Matrix::from_vec(8, 2, x).unwrap(),
                    y: vec![target(i); 3],
                    origin_timestamp: Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(),
                }
            })
            .collect()
    }

    #[test]
    fn batching_arithmetic() {
        let cfg = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        let (_, h) = train(&windows(480, |_| 120.0), &windows(10, |_| 120.0), &tiny_arch(), &cfg).unwrap();
        assert_eq!(h.optimizer_steps, 10);
        let (_, h) = train(&windows(481, |_| 120.0), &windows(10, |_| 120.0), &tiny_arch(), &cfg).unwrap();
        assert_eq!(h.optimizer_steps, 11);
    }

    #[test]
    fn same_seed_same_result() {
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 16,
            seed: 4,
            ..TrainConfig::default()
        };
        let tr = windows(100, |i| 100.0 + (i % 7) as f64 * 10.0);
        let va = windows(20, |i| 100.0 + (i % 5) as f64 * 10.0);
        let (p1, h1) = train(&tr, &va, &tiny_arch(), &cfg).unwrap();
        let (p2, h2) = train(&tr, &va, &tiny_arch(), &cfg).unwrap();
        assert_eq!(p1.values(), p2.values());
        assert_eq!(h1, h2);
        assert_eq!(h1.epochs.len(), 3);
        assert_eq!(h1.to_csv().lines().count(), 4);
    }

    #[test]
    fn returns_best_validation_epoch() {
        let cfg = TrainConfig {
            epochs: 4,
            batch_size: 8,
            learning_rate: 0.05,
            ..TrainConfig::default()
        };
        let tr = windows(64, |i| 80.0 + (i % 9) as f64 * 15.0);
        let va = windows(16, |i| 80.0 + (i % 4) as f64 * 15.0);
        let (p, h) = train(&tr, &va, &tiny_arch(), &cfg).unwrap();
        let best = h
            .epochs
            .iter()
            .min_by(|a, b| a.val_loss.total_cmp(&b.val_loss))
            .unwrap();
        assert_eq!(h.best_epoch, best.epoch);
        let vl = validation_loss(&p, &va, &cfg.objective).unwrap();
        assert_eq!(vl, best.val_loss);
    }

    #[test]
    fn rejects_empty_sets_and_bad_config() {
        let w = windows(4, |_| 100.0);
        assert!(train(&[], &w, &tiny_arch(), &TrainConfig::default()).is_err());
        assert!(train(&w, &[], &tiny_arch(), &TrainConfig::default()).is_err());
        let cfg = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(train(&w, &w, &tiny_arch(), &cfg).is_err());
    }

    #[test]
    fn objectives_share_the_starting_point() {
        use crate::data::Thresholds;
        let tr = windows(40, |i| 50.0 + (i % 8) as f64 * 30.0);
        let va = windows(12, |i| 60.0 + (i % 6) as f64 * 35.0);
        let p0 = initial_params(&tr, &tiny_arch(), 8).unwrap();
        let preds: Vec<f64> = va.iter().flat_map(|w| model_forward(&p0, &w.x).unwrap()).collect();
        let truth: Vec<f64> = va.iter().flat_map(|w| w.y.clone()).collect();
        for objective in [
            Objective::Mae,
            Objective::region_weighted(3.296, 2.382, Thresholds::default()),
        ] {
            let cfg = TrainConfig {
                epochs: 1,
                seed: 8,
                objective,
                ..TrainConfig::default()
            };
            let (_, h) = train(&tr, &va, &tiny_arch(), &cfg).unwrap();
            assert_eq!(h.initial_val_loss, objective.value(&preds, &truth).unwrap());
        }
    }

    #[test]
    fn non_finite_input_aborts_with_epoch() {
        let mut tr = windows(4, |_| 100.0);
        tr[2].x.set(0, 0, f64::INFINITY);
        let va = windows(4, |_| 100.0);
        let cfg = TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        };
        match train(&tr, &va, &tiny_arch(), &cfg) {
            Err(GlimmerError::Numeric { epoch, .. }) => assert_eq!(epoch, 1),
            other => panic!("unexpected {other:?}"),
        }
    }
}
