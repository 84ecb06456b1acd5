//! Glue between raw records and trained models: split, feature, window, scale,
//! train, and forecast.
//!
//! Features are computed over each file's full series before splitting. The
//! moving average only looks backwards, so this leaks nothing forward in time,
//! and it spares the validation and test parts a fresh 200-sample warm-up.

use chrono::{DateTime, SecondsFormat, Utc};

use crate::data::{
    apply_scaler, build_features, chronological_split, fit_scaler, make_windows, CgmRecord,
    FeatureRow, Scaler, Thresholds, WindowConfig, WindowSample,
};
use crate::error::{GlimmerError, Result};
use crate::eval::Forecaster;
use crate::nn::{train, ArchConfig, Checkpoint, History, TrainConfig};

/// Where the held-out test data comes from.
#[derive(Clone, Copy, Debug)]
pub enum DataSource<'a> {
    /// A training file plus a separate, untouched test file.
    Partitioned {
        train: &'a [CgmRecord],
        test: &'a [CgmRecord],
    },
    /// One series; the last part becomes the test set.
    Unpartitioned(&'a [CgmRecord]),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrepareConfig {
    pub thresholds: Thresholds,
    pub window: WindowConfig,
    /// Head fraction of the train/test split (unpartitioned data only).
    pub test_split: f64,
    /// Head fraction of the train/validation split.
    pub val_split: f64,
    /// Window stride for the training and validation sets. The test set always uses 1.
    pub train_stride: usize,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        PrepareConfig {
            thresholds: Thresholds::default(),
            window: WindowConfig::default(),
            test_split: 0.8,
            val_split: 0.8,
            train_stride: 1,
        }
    }
}

impl PrepareConfig {
    pub fn for_arch(arch: &ArchConfig) -> Self {
        PrepareConfig {
            window: WindowConfig {
                in_len: arch.input_len,
                out_len: arch.output_len,
                ..WindowConfig::default()
            },
            ..PrepareConfig::default()
        }
    }
}

/// Windows ready for training. `train` and `val` are normalized with `scaler`;
/// `test` is left raw because checkpoints apply their own scaler when forecasting.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedData {
    pub train: Vec<WindowSample>,
    pub val: Vec<WindowSample>,
    pub test: Vec<WindowSample>,
    pub scaler: Scaler,
    pub thresholds: Thresholds,
}

struct Featured {
    rows: Vec<FeatureRow>,
    timestamps: Vec<DateTime<Utc>>,
}

impl Featured {
    fn new(records: &[CgmRecord], t: &Thresholds) -> Result<Self> {
        Ok(Featured {
            rows: build_features(records, t)?,
            timestamps: records.iter().map(|r| r.timestamp).collect(),
        })
    }

    fn split(&self, fraction: f64) -> Result<(Featured, Featured)> {
        let (rh, rt) = chronological_split(&self.rows, fraction)?;
        let (th, tt) = chronological_split(&self.timestamps, fraction)?;
        Ok((
            Featured { rows: rh, timestamps: th },
            Featured { rows: rt, timestamps: tt },
        ))
    }

    fn windows(&self, cfg: &WindowConfig, stride: usize, what: &str) -> Result<Vec<WindowSample>> {
        let w = make_windows(&self.rows, &self.timestamps, &WindowConfig { stride, ..*cfg })?;
        if w.is_empty() {
            return Err(GlimmerError::Split(format!(
                "{what} part ({} samples) is too short for a {}-sample window",
                self.rows.len(),
                cfg.span()
            )));
        }
        Ok(w)
    }
}

pub fn prepare(source: DataSource<'_>, cfg: &PrepareConfig) -> Result<PreparedData> {
    prepare_many(&[source], cfg)
}

/// Splits and windows each source on its own, then pools the windows and fits one
/// scaler on the pooled training part.
pub fn prepare_many(sources: &[DataSource<'_>], cfg: &PrepareConfig) -> Result<PreparedData> {
    cfg.thresholds.validate()?;
    cfg.window.validate()?;
    if cfg.train_stride == 0 {
        return Err(GlimmerError::Config("train_stride must be >= 1".into()));
    }
    if sources.is_empty() {
        return Err(GlimmerError::domain("no data sources to prepare"));
    }
    let t = &cfg.thresholds;
    let (mut train_w, mut val_w, mut test_w) = (Vec::new(), Vec::new(), Vec::new());
    for source in sources {
        let (fit, test) = match *source {
            DataSource::Partitioned { train, test } => (Featured::new(train, t)?, Featured::new(test, t)?),
            DataSource::Unpartitioned(records) => Featured::new(records, t)?.split(cfg.test_split)?,
        };
        let (tr, va) = fit.split(cfg.val_split)?;
        train_w.extend(tr.windows(&cfg.window, cfg.train_stride, "training")?);
        val_w.extend(va.windows(&cfg.window, cfg.train_stride, "validation")?);
        test_w.extend(test.windows(&cfg.window, 1, "test")?);
    }
    let scaler = fit_scaler(&train_w)?;
    Ok(PreparedData {
        train: apply_scaler(&scaler, &train_w)?,
        val: apply_scaler(&scaler, &val_w)?,
        test: test_w,
        scaler,
        thresholds: *t,
    })
}

/// Trains one model and bundles it with the preprocessing it needs at inference time.
pub fn train_checkpoint(
    data: &PreparedData,
    arch: &ArchConfig,
    cfg: &TrainConfig,
) -> Result<(Checkpoint, History)> {
    let (params, history) = train(&data.train, &data.val, arch, cfg)?;
    Ok((
        Checkpoint {
            params,
            scaler: data.scaler.clone(),
            thresholds: data.thresholds,
        },
        history,
    ))
}

/// One forecast per full window of `records`, keyed by the window's last input timestamp.
pub fn forecast_records(
    ckpt: &Checkpoint,
    records: &[CgmRecord],
) -> Result<Vec<(DateTime<Utc>, Vec<f64>)>> {
    let arch = ckpt.params.arch();
    let window = WindowConfig {
        in_len: arch.input_len,
        out_len: arch.output_len,
        ..WindowConfig::default()
    };
    let feats = Featured::new(records, &ckpt.thresholds)?;
    let windows = make_windows(&feats.rows, &feats.timestamps, &window)?;
    windows
        .iter()
        .map(|w| Ok((w.origin_timestamp, ckpt.forecast(w)?)))
        .collect()
}

/// `origin_timestamp,pred_5min,...` with one column per horizon step.
pub fn forecast_csv(forecasts: &[(DateTime<Utc>, Vec<f64>)], horizon: usize) -> String {
    let mut s = String::from("origin_timestamp");
    for k in 1..=horizon {
        s.push_str(&format!(",pred_{}min", 5 * k));
    }
    s.push('\n');
    for (ts, values) in forecasts {
        s.push_str(&ts.to_rfc3339_opts(SecondsFormat::Secs, true));
        for v in values {
            s.push_str(&format!(",{v}"));
        }
        s.push('\n');
    }
    s
}
