//! Forecast evaluation: RMSE/MAE, per-region error slices, event classification
//! scores and Clarke Error Grid zoning, aggregated over one or more seeds.
//!
//! Every (window, horizon step) pair is one scalar sample. Regions and event
//! labels for the reference are taken from the true value; predicted labels come
//! from thresholding the predicted value.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{apply_scaler, classify_region, Region, Thresholds, WindowSample};
use crate::error::{GlimmerError, Result};
use crate::nn::{model_forward, Checkpoint};

fn check_pairs(truth: &[f64], pred: &[f64]) -> Result<()> {
    if truth.len() != pred.len() {
        return Err(GlimmerError::domain(format!(
            "{} truths but {} predictions",
            truth.len(),
            pred.len()
        )));
    }
    if truth.is_empty() {
        return Err(GlimmerError::domain("no samples to evaluate"));
    }
    Ok(())
}

pub fn rmse(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check_pairs(truth, pred)?;
    let sq: f64 = truth.iter().zip(pred).map(|(y, p)| (y - p) * (y - p)).sum();
    Ok((sq / truth.len() as f64).sqrt())
}

pub fn mae(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check_pairs(truth, pred)?;
    let abs: f64 = truth.iter().zip(pred).map(|(y, p)| (y - p).abs()).sum();
    Ok(abs / truth.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub rmse: f64,
    pub mae: f64,
    pub n: usize,
}

impl ErrorStats {
    pub fn compute(truth: &[f64], pred: &[f64]) -> Result<Self> {
        Ok(ErrorStats {
            rmse: rmse(truth, pred)?,
            mae: mae(truth, pred)?,
            n: truth.len(),
        })
    }
}

/// Error restricted to samples whose true value falls in a region. Empty slices are `None`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionSlices {
    pub normal: Option<ErrorStats>,
    /// Hypo and hyper samples pooled.
    pub dysglycemia: Option<ErrorStats>,
    pub hyper: Option<ErrorStats>,
    pub hypo: Option<ErrorStats>,
}

pub fn region_slice_metrics(truth: &[f64], pred: &[f64], t: &Thresholds) -> Result<RegionSlices> {
    check_pairs(truth, pred)?;
    let regions = truth
        .iter()
        .map(|&y| classify_region(y, t))
        .collect::<Result<Vec<_>>>()?;
    let slice = |keep: &dyn Fn(Region) -> bool| -> Result<Option<ErrorStats>> {
        let (ys, ps): (Vec<f64>, Vec<f64>) = truth
            .iter()
            .zip(pred)
            .zip(&regions)
            .filter(|(_, r)| keep(**r))
            .map(|((y, p), _)| (*y, *p))
            .unzip();
        if ys.is_empty() {
            Ok(None)
        } else {
            ErrorStats::compute(&ys, &ps).map(Some)
        }
    };
    Ok(RegionSlices {
        normal: slice(&|r| r == Region::Normal)?,
        dysglycemia: slice(&|r| r != Region::Normal)?,
        hyper: slice(&|r| r == Region::Hyper)?,
        hypo: slice(&|r| r == Region::Hypo)?,
    })
}

/// Event classes scored by precision/recall/F1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventClass {
    Dysglycemia,
    Hyper,
    Hypo,
    Normal,
}

impl EventClass {
    pub const ALL: [EventClass; 4] = [
        EventClass::Dysglycemia,
        EventClass::Hyper,
        EventClass::Hypo,
        EventClass::Normal,
    ];

    pub fn regions(self) -> &'static [Region] {
        match self {
            EventClass::Dysglycemia => &[Region::Hypo, Region::Hyper],
            EventClass::Hyper => &[Region::Hyper],
            EventClass::Hypo => &[Region::Hypo],
            EventClass::Normal => &[Region::Normal],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EventClass::Dysglycemia => "dysglycemia",
            EventClass::Hyper => "hyper",
            EventClass::Hypo => "hypo",
            EventClass::Normal => "normal",
        }
    }
}

/// Precision, recall and F1. A zero denominator yields 0 and sets the matching
/// `*_undefined` flag.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

impl ClassScores {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| -> (f64, bool) {
            if den == 0 {
                (0.0, true)
            } else {
                (num as f64 / den as f64, false)
            }
        };
        let (precision, precision_undefined) = ratio(tp, tp + fp);
        let (recall, recall_undefined) = ratio(tp, tp + fn_);
        let (f1, f1_undefined) = if precision + recall > 0.0 {
            (2.0 * precision * recall / (precision + recall), false)
        } else {
            (0.0, true)
        };
        ClassScores {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
            precision_undefined,
            recall_undefined,
            f1_undefined,
        }
    }
}

pub fn classification_metrics(
    truth: &[f64],
    pred: &[f64],
    t: &Thresholds,
    target: &[Region],
) -> Result<ClassScores> {
    check_pairs(truth, pred)?;
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (&y, &p) in truth.iter().zip(pred) {
        let actual = target.contains(&classify_region(y, t)?);
        let predicted = target.contains(&classify_region(p, t)?);
        match (actual, predicted) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(ClassScores::from_counts(tp, fp, fn_))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClarkeZone {
    A,
    B,
    C,
    D,
    E,
}

impl ClarkeZone {
    pub const ALL: [ClarkeZone; 5] = [
        ClarkeZone::A,
        ClarkeZone::B,
        ClarkeZone::C,
        ClarkeZone::D,
        ClarkeZone::E,
    ];

    pub fn letter(self) -> char {
        match self {
            ClarkeZone::A => 'A',
            ClarkeZone::B => 'B',
            ClarkeZone::C => 'C',
            ClarkeZone::D => 'D',
            ClarkeZone::E => 'E',
        }
    }
}

/// Clarke Error Grid zone of a (reference, prediction) pair in mg/dL.
/// Rules are tried in the order A, E, C, D; anything left is B.
pub fn clarke_zone(reference: f64, pred: f64) -> Result<ClarkeZone> {
    if !(reference.is_finite() && pred.is_finite() && reference > 0.0 && pred > 0.0) {
        return Err(GlimmerError::domain(format!(
            "Clarke zone needs positive values, got ({reference}, {pred})"
        )));
    }
    let (r, p) = (reference, pred);
    let zone = if (r <= 70.0 && p <= 70.0) || (p - r).abs() <= 0.2 * r {
        ClarkeZone::A
    } else if (r >= 180.0 && p <= 70.0) || (r <= 70.0 && p >= 180.0) {
        ClarkeZone::E
    } else if ((70.0..=290.0).contains(&r) && p >= r + 110.0)
        || ((130.0..=180.0).contains(&r) && p <= (7.0 / 5.0) * r - 182.0)
    {
        ClarkeZone::C
    } else if (r >= 240.0 && (70.0..=180.0).contains(&p))
        || (r <= 175.0 / 3.0 && (70.0..=180.0).contains(&p))
        || ((175.0 / 3.0..=70.0).contains(&r) && p >= (6.0 / 5.0) * r)
    {
        ClarkeZone::D
    } else {
        ClarkeZone::B
    };
    Ok(zone)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CegSummary {
    /// Pair counts per zone, A through E.
    pub counts: [usize; 5],
    /// Percentages per zone, A through E; they sum to 100.
    pub percent: [f64; 5],
}

impl CegSummary {
    pub fn percent_of(&self, zone: ClarkeZone) -> f64 {
        self.percent[zone as usize]
    }
}

/// Zone percentages. Rounding residue is folded into the most populated zone so
/// the five values add up to 100.
pub fn ceg_summary(pairs: &[(f64, f64)]) -> Result<CegSummary> {
    if pairs.is_empty() {
        return Err(GlimmerError::domain("Clarke summary of zero pairs"));
    }
    let mut counts = [0usize; 5];
    for &(r, p) in pairs {
        counts[clarke_zone(r, p)? as usize] += 1;
    }
    let n = pairs.len() as f64;
    let mut percent = counts.map(|c| c as f64 * 100.0 / n);
    let largest = (0..5).max_by_key(|&i| (counts[i], std::cmp::Reverse(i))).unwrap();
    let others: f64 = (0..5).filter(|&i| i != largest).map(|i| percent[i]).sum();
    percent[largest] = 100.0 - others;
    Ok(CegSummary { counts, percent })
}

/// Scores keyed by event class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub dysglycemia: ClassScores,
    pub hyper: ClassScores,
    pub hypo: ClassScores,
    pub normal: ClassScores,
}

impl ClassReport {
    pub fn get(&self, class: EventClass) -> &ClassScores {
        match class {
            EventClass::Dysglycemia => &self.dysglycemia,
            EventClass::Hyper => &self.hyper,
            EventClass::Hypo => &self.hypo,
            EventClass::Normal => &self.normal,
        }
    }
}

/// All metrics for one seed's predictions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub n_samples: usize,
    pub overall: ErrorStats,
    pub regions: RegionSlices,
    pub classes: ClassReport,
    pub ceg: CegSummary,
}

impl SeedReport {
    pub fn compute(seed: u64, truth: &[f64], pred: &[f64], t: &Thresholds) -> Result<Self> {
        let class = |c: EventClass| classification_metrics(truth, pred, t, c.regions());
        let pairs: Vec<(f64, f64)> = truth.iter().copied().zip(pred.iter().copied()).collect();
        Ok(SeedReport {
            seed,
            n_samples: truth.len(),
            overall: ErrorStats::compute(truth, pred)?,
            regions: region_slice_metrics(truth, pred, t)?,
            classes: ClassReport {
                dysglycemia: class(EventClass::Dysglycemia)?,
                hyper: class(EventClass::Hyper)?,
                hypo: class(EventClass::Hypo)?,
                normal: class(EventClass::Normal)?,
            },
            ceg: ceg_summary(&pairs)?,
        })
    }

    /// Flat `(metric name, value)` view; absent slices give `None`.
    pub fn metrics(&self) -> Vec<(String, Option<f64>)> {
        let mut out = vec![
            ("rmse".to_string(), Some(self.overall.rmse)),
            ("mae".to_string(), Some(self.overall.mae)),
        ];
        let slices = [
            ("normal", self.regions.normal),
            ("dysglycemia", self.regions.dysglycemia),
            ("hyper", self.regions.hyper),
            ("hypo", self.regions.hypo),
        ];
        for (name, s) in slices {
            out.push((format!("rmse_{name}"), s.map(|s| s.rmse)));
            out.push((format!("mae_{name}"), s.map(|s| s.mae)));
        }
        for class in EventClass::ALL {
            let c = self.classes.get(class);
            out.push((format!("precision_{}", class.name()), Some(c.precision)));
            out.push((format!("recall_{}", class.name()), Some(c.recall)));
            out.push((format!("f1_{}", class.name()), Some(c.f1)));
        }
        for zone in ClarkeZone::ALL {
            out.push((
                format!("ceg_{}", zone.letter().to_ascii_lowercase()),
                Some(self.ceg.percent_of(zone)),
            ));
        }
        out
    }
}

/// Mean and population standard deviation of one metric across seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    /// Per-seed values, in seed order.
    pub values: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_samples: usize,
    pub seeds: Vec<SeedReport>,
    pub summary: Vec<MetricSummary>,
}

/// Truth/prediction pairs produced by one seed's model.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub truth: Vec<f64>,
    pub pred: Vec<f64>,
}

pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

pub fn evaluate_runs(runs: &[SeedRun], t: &Thresholds) -> Result<EvalReport> {
    if runs.is_empty() {
        return Err(GlimmerError::domain("no seed runs to evaluate"));
    }
    let seeds = runs
        .iter()
        .map(|r| SeedReport::compute(r.seed, &r.truth, &r.pred, t))
        .collect::<Result<Vec<_>>>()?;
    let n_samples = seeds[0].n_samples;
    if seeds.iter().any(|s| s.n_samples != n_samples) {
        return Err(GlimmerError::domain("seed runs cover different sample counts"));
    }

    let per_seed: Vec<Vec<(String, Option<f64>)>> = seeds.iter().map(SeedReport::metrics).collect();
    let summary = (0..per_seed[0].len())
        .map(|m| {
            let values: Vec<Option<f64>> = per_seed.iter().map(|s| s[m].1).collect();
            let present: Vec<f64> = values.iter().flatten().copied().collect();
            let stats = mean_std(&present);
            MetricSummary {
                metric: per_seed[0][m].0.clone(),
                mean: stats.map(|s| s.0),
                std: stats.map(|s| s.1),
                values,
            }
        })
        .collect();
    Ok(EvalReport {
        n_samples,
        seeds,
        summary,
    })
}

/// Anything that turns a raw (unscaled) window into a horizon forecast.
pub trait Forecaster: Sync {
    fn forecast(&self, window: &WindowSample) -> Result<Vec<f64>>;
}

impl Forecaster for Checkpoint {
    fn forecast(&self, window: &WindowSample) -> Result<Vec<f64>> {
        let scaled = apply_scaler(&self.scaler, std::slice::from_ref(window))?;
        model_forward(&self.params, &scaled[0].x)
    }
}

/// Forecasts every window with every seed's model. Runs come back in model order.
pub fn seed_runs(models: &[(u64, &dyn Forecaster)], windows: &[WindowSample]) -> Result<Vec<SeedRun>> {
    let truth: Vec<f64> = windows.iter().flat_map(|w| w.y.iter().copied()).collect();
    models
        .par_iter()
        .map(|&(seed, model)| {
            let mut pred = Vec::with_capacity(truth.len());
            for w in windows {
                pred.extend(model.forecast(w)?);
            }
            Ok(SeedRun {
                seed,
                truth: truth.clone(),
                pred,
            })
        })
        .collect()
}

/// Predicts every window with every seed's model and scores the pooled scalar pairs.
pub fn evaluate(
    models: &[(u64, &dyn Forecaster)],
    windows: &[WindowSample],
    t: &Thresholds,
) -> Result<EvalReport> {
    evaluate_runs(&seed_runs(models, windows)?, t)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| GlimmerError::Io(e.into()))
    }

    /// One row per metric: `metric,mean,std,seed_<s>...`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,mean,std");
        for seed in &self.seeds {
            s.push_str(&format!(",seed_{}", seed.seed));
        }
        s.push('\n');
        for m in &self.summary {
            s.push_str(&format!("{},{},{}", m.metric, fmt_opt(m.mean), fmt_opt(m.std)));
            for v in &m.values {
                s.push(',');
                s.push_str(&fmt_opt(*v));
            }
            s.push('\n');
        }
        s
    }

    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.summary.iter().find(|m| m.metric == name)
    }
}

/// `ref,pred,zone` rows for external plotting.
pub fn ceg_pairs_csv(truth: &[f64], pred: &[f64]) -> Result<String> {
    check_pairs(truth, pred)?;
    let mut s = String::from("ref,pred,zone\n");
    for (&r, &p) in truth.iter().zip(pred) {
        s.push_str(&format!("{r},{p},{}\n", clarke_zone(r, p)?.letter()));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const T: Thresholds = Thresholds {
        t_hypo: 70.0,
        t_hyper: 180.0,
    };

    #[test]
    fn rmse_and_mae_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(rmse(&[10.0], &[15.0]).unwrap(), 5.0);
        assert_eq!(mae(&[100.0, 100.0], &[90.0, 110.0]).unwrap(), 10.0);
        assert_eq!(mae(&[0.0, 0.0, 0.0], &[1.0, -2.0, 3.0]).unwrap(), 2.0);
        assert!(rmse(&[], &[]).is_err());
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn slices_by_hand() {
        let s = region_slice_metrics(&[60.0, 200.0], &[70.0, 190.0], &T).unwrap();
        assert_eq!(s.hypo.unwrap().mae, 10.0);
        assert_eq!(s.hyper.unwrap().mae, 10.0);
        assert_eq!(s.dysglycemia.unwrap().mae, 10.0);
        assert!(s.normal.is_none());

        let truth = [100.0, 120.0, 150.0];
        let pred = [110.0, 100.0, 150.0];
        let s = region_slice_metrics(&truth, &pred, &T).unwrap();
        assert!(s.hypo.is_none() && s.hyper.is_none() && s.dysglycemia.is_none());
        assert_eq!(s.normal.unwrap(), ErrorStats::compute(&truth, &pred).unwrap());
    }

    #[test]
    fn classification_examples() {
        let c = ClassScores::from_counts(8, 2, 0);
        assert!((c.precision - 0.8).abs() < 1e-15);

        // regions truth [hypo, normal, hyper, hyper], pred [hypo, hyper, hyper, normal]
        let c = classification_metrics(
            &[60.0, 100.0, 200.0, 250.0],
            &[65.0, 190.0, 220.0, 150.0],
            &T,
            &[Region::Hyper],
        )
        .unwrap();
        assert_eq!((c.tp, c.fp, c.fn_), (1, 1, 1));
        assert_eq!((c.precision, c.recall, c.f1), (0.5, 0.5, 0.5));

        let c = classification_metrics(&[100.0], &[110.0], &T, &[Region::Hypo]).unwrap();
        assert_eq!((c.precision, c.recall, c.f1), (0.0, 0.0, 0.0));
        assert!(c.precision_undefined && c.recall_undefined && c.f1_undefined);
    }

    #[test]
    fn clarke_examples() {
        assert_eq!(clarke_zone(100.0, 110.0).unwrap(), ClarkeZone::A);
        assert_eq!(clarke_zone(50.0, 50.0).unwrap(), ClarkeZone::A);
        assert_eq!(clarke_zone(200.0, 60.0).unwrap(), ClarkeZone::E);
        assert!(clarke_zone(0.0, 100.0).is_err());
        assert!(clarke_zone(100.0, -1.0).is_err());
        assert!(clarke_zone(f64::NAN, 100.0).is_err());
    }

    #[test]
    fn clarke_golden_points() {
        use ClarkeZone::*;
        let golden = [
            ((100.0, 110.0), A),
            ((50.0, 50.0), A),
            ((200.0, 240.0), A),
            ((200.0, 60.0), E),
            ((60.0, 200.0), E),
            ((100.0, 220.0), C),
            ((170.0, 50.0), C),
            ((300.0, 100.0), D),
            ((50.0, 100.0), D),
            ((65.0, 80.0), D),
            ((100.0, 150.0), B),
            ((250.0, 190.0), B),
        ];
        for ((r, p), z) in golden {
            assert_eq!(clarke_zone(r, p).unwrap(), z, "({r}, {p})");
        }
    }

    #[test]
    fn ceg_summary_examples() {
        let s = ceg_summary(&[(100.0, 110.0), (200.0, 60.0)]).unwrap();
        assert_eq!(s.percent, [50.0, 0.0, 0.0, 0.0, 50.0]);
        let s = ceg_summary(&[(120.0, 120.0); 7]).unwrap();
        assert_eq!(s.percent_of(ClarkeZone::A), 100.0);
        assert!(ceg_summary(&[]).is_err());
    }

    #[test]
    fn single_seed_has_zero_std() {
        let truth = vec![60.0, 100.0, 200.0, 150.0];
        let pred = vec![70.0, 95.0, 180.0, 150.0];
        let rep = evaluate_runs(&[SeedRun { seed: 3, truth, pred }], &T).unwrap();
        assert!(rep.summary.iter().all(|m| m.std.is_none_or(|s| s == 0.0)));
        let csv = rep.to_csv();
        assert!(csv.starts_with("metric,mean,std,seed_3\n"));
        assert_eq!(csv.lines().count(), 1 + rep.summary.len());
    }

    #[test]
    fn oracle_forecaster_is_perfect() {
        struct Oracle;
        impl Forecaster for Oracle {
            fn forecast(&self, w: &WindowSample) -> Result<Vec<f64>> {
                Ok(w.y.clone())
            }
        }
        use crate::matrix::Matrix;
        use chrono::{TimeZone, Utc};
        let windows: Vec<WindowSample> = [[60.0, 65.0], [120.0, 130.0], [200.0, 250.0]]
            .iter()
            .map(|y| WindowSample {
                x: Matrix::zeros(1, 1),
                y: y.to_vec(),
                origin_timestamp: Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(),
            })
            .collect();
        let rep = evaluate(&[(1, &Oracle), (2, &Oracle)], &windows, &T).unwrap();
        assert_eq!(rep.n_samples, 6);
        assert_eq!(rep.metric("rmse").unwrap().mean, Some(0.0));
        assert_eq!(rep.metric("mae").unwrap().std, Some(0.0));
        assert_eq!(rep.metric("ceg_a").unwrap().mean, Some(100.0));
        for class in EventClass::ALL {
            assert_eq!(rep.seeds[0].classes.get(class).recall, 1.0);
        }
        let parsed: EvalReport = serde_json::from_str(&rep.to_json().unwrap()).unwrap();
        assert_eq!(parsed, rep);
    }

    #[test]
    fn ceg_pair_dump() {
        let csv = ceg_pairs_csv(&[100.0, 200.0], &[110.0, 60.0]).unwrap();
        assert_eq!(csv, "ref,pred,zone\n100,110,A\n200,60,E\n");
    }

    fn pairs() -> impl Strategy<Value = Vec<(f64, f64)>> {
        proptest::collection::vec((20.0f64..450.0, 20.0f64..450.0), 1..80)
    }

    proptest! {
        #[test]
        fn rmse_dominates_mae(v in pairs()) {
            let (t, p): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            let r = rmse(&t, &p).unwrap();
            let m = mae(&t, &p).unwrap();
            prop_assert!(m >= 0.0 && r >= m - 1e-12 * r.max(1.0));
        }

        #[test]
        fn identity_is_always_zone_a(g in 1.0f64..600.0) {
            prop_assert_eq!(clarke_zone(g, g).unwrap(), ClarkeZone::A);
        }

        #[test]
        fn ceg_percentages_sum_to_100(v in pairs()) {
            let s = ceg_summary(&v).unwrap();
            prop_assert_eq!(s.counts.iter().sum::<usize>(), v.len());
            prop_assert!((s.percent.iter().sum::<f64>() - 100.0).abs() < 1e-9);
            prop_assert!(s.percent.iter().all(|p| *p >= 0.0));
        }

        #[test]
        fn dysglycemia_slice_is_pooled(v in pairs()) {
            let (t, p): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            let s = region_slice_metrics(&t, &p, &T).unwrap();
            let (dt, dp): (Vec<f64>, Vec<f64>) = t.iter().zip(&p)
                .filter(|(y, _)| **y < 70.0 || **y > 180.0)
                .map(|(y, p)| (*y, *p))
                .unzip();
            match s.dysglycemia {
                None => prop_assert!(dt.is_empty()),
                Some(d) => {
                    prop_assert_eq!(d.rmse, rmse(&dt, &dp).unwrap());
                    prop_assert_eq!(d.mae, mae(&dt, &dp).unwrap());
                }
            }
        }
    }
}
