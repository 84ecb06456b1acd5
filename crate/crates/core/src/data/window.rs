use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{FeatureRow, SAMPLE_INTERVAL_SECS};
use crate::error::{GlimmerError, Result};
use crate::matrix::Matrix;

/// One supervised example: `in_len` feature rows and the next `out_len` raw glucose values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSample {
    pub x: Matrix,
    /// mg/dL, never normalized.
    pub y: Vec<f64>,
    /// Timestamp of the last input row.
    pub origin_timestamp: DateTime<Utc>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub in_len: usize,
    pub out_len: usize,
    pub stride: usize,
    /// Largest gap between consecutive samples a window may span.
    pub gap_tolerance_secs: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            in_len: 72,
            out_len: 12,
            stride: 1,
            gap_tolerance_secs: 1.5 * SAMPLE_INTERVAL_SECS as f64,
        }
    }
}

impl WindowConfig {
    pub fn span(&self) -> usize {
        self.in_len + self.out_len
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_len == 0 || self.out_len == 0 || self.stride == 0 {
            return Err(GlimmerError::Config(
                "window lengths and stride must be >= 1".into(),
            ));
        }
        if self.gap_tolerance_secs.is_nan() || self.gap_tolerance_secs <= 0.0 {
            return Err(GlimmerError::Config("gap tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Slides a window over every contiguous run of samples. A run breaks wherever two
/// consecutive timestamps are further apart than the gap tolerance; windows never
/// straddle a break.
pub fn make_windows(
    rows: &[FeatureRow],
    timestamps: &[DateTime<Utc>],
    cfg: &WindowConfig,
) -> Result<Vec<WindowSample>> {
    cfg.validate()?;
    if rows.len() != timestamps.len() {
        return Err(GlimmerError::shape(format!(
            "{} feature rows but {} timestamps",
            rows.len(),
            timestamps.len()
        )));
    }
    let span = cfg.span();
    let mut out = Vec::new();
    let mut run_start = 0;
    for end in 1..=rows.len() {
        let breaks = end == rows.len() || {
            let gap = (timestamps[end] - timestamps[end - 1]).num_milliseconds() as f64 / 1000.0;
            gap > cfg.gap_tolerance_secs
        };
        if !breaks {
            continue;
        }
        let run_len = end - run_start;
        if run_len >= span {
            for start in (run_start..=end - span).step_by(cfg.stride) {
                out.push(window_at(rows, timestamps, start, cfg));
            }
        }
        run_start = end;
    }
    Ok(out)
}

fn window_at(
    rows: &[FeatureRow],
    timestamps: &[DateTime<Utc>],
    start: usize,
    cfg: &WindowConfig,
) -> WindowSample {
    let inputs = &rows[start..start + cfg.in_len];
    let mut data = Vec::with_capacity(cfg.in_len * inputs[0].0.len());
    for r in inputs {
        data.extend_from_slice(&r.0);
    }
    let x = Matrix::from_vec(cfg.in_len, inputs[0].0.len(), data).expect("window shape");
    let y = rows[start + cfg.in_len..start + cfg.span()]
        .iter()
        .map(FeatureRow::glucose)
        .collect();
    WindowSample {
        x,
        y,
        origin_timestamp: timestamps[start + cfg.in_len - 1],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, TimeZone};
    use proptest::prelude::*;

    fn series(n: usize, gap_after: Option<(usize, i64)>) -> (Vec<FeatureRow>, Vec<DateTime<Utc>>) {
        let t0 = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
        let mut t = t0;
        let mut rows = Vec::new();
        let mut ts = Vec::new();
        for i in 0..n {
            rows.push(FeatureRow([100.0 + i as f64, 0.0, 0.0, 0.0, 100.0, 2.0]));
            ts.push(t);
            let step = match gap_after {
                Some((row, minutes)) if row == i + 1 => minutes,
                _ => 5,
            };
            t += Duration::minutes(step);
        }
        (rows, ts)
    }

    #[test]
    fn counts_for_contiguous_runs() {
        let cfg = WindowConfig::default();
        let (rows, ts) = series(84, None);
        assert_eq!(make_windows(&rows, &ts, &cfg).unwrap().len(), 1);
        let (rows, ts) = series(90, None);
        assert_eq!(make_windows(&rows, &ts, &cfg).unwrap().len(), 7);
        let (rows, ts) = series(50, None);
        assert!(make_windows(&rows, &ts, &cfg).unwrap().is_empty());
    }

    #[test]
    fn windows_never_span_a_gap() {
        let cfg = WindowConfig::default();
        let (rows, ts) = series(100, Some((50, 30)));
        assert!(make_windows(&rows, &ts, &cfg).unwrap().is_empty());
        // 100 rows then 100 rows: 17 + 17
        let (rows, ts) = series(200, Some((100, 30)));
        assert_eq!(make_windows(&rows, &ts, &cfg).unwrap().len(), 34);
    }

    #[test]
    fn window_contents() {
        let cfg = WindowConfig::default();
        let (rows, ts) = series(85, None);
        let w = make_windows(&rows, &ts, &cfg).unwrap();
        assert_eq!(w[1].x.shape(), (72, 6));
        assert_eq!(w[1].x.get(0, 0), 101.0);
        assert_eq!(w[1].y, (73..85).map(|i| 100.0 + i as f64).collect::<Vec<_>>());
        assert_eq!(w[1].origin_timestamp, ts[72]);
    }

    #[test]
    fn stride_skips_positions() {
        let cfg = WindowConfig {
            stride: 3,
            ..WindowConfig::default()
        };
        let (rows, ts) = series(90, None);
        // positions 0, 3, 6
        assert_eq!(make_windows(&rows, &ts, &cfg).unwrap().len(), 3);
    }

    #[test]
    fn misaligned_inputs_rejected() {
        let (rows, ts) = series(90, None);
        assert!(make_windows(&rows, &ts[..89], &WindowConfig::default()).is_err());
    }

    proptest! {
        #[test]
        fn window_count_matches_run_lengths(gaps in proptest::collection::vec(prop_oneof![Just(5i64), Just(5), Just(5), Just(7), Just(8), Just(30)], 0..400)) {
            let cfg = WindowConfig::default();
            let t0 = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
            let mut ts = vec![t0];
            for g in &gaps {
                let last = *ts.last().unwrap();
                ts.push(last + Duration::minutes(*g));
            }
            let rows = vec![FeatureRow([100.0, 0.0, 0.0, 0.0, 100.0, 2.0]); ts.len()];
            let windows = make_windows(&rows, &ts, &cfg).unwrap();

            let mut expected = 0usize;
            let mut run = 1usize;
            for g in &gaps {
                if *g as f64 * 60.0 > cfg.gap_tolerance_secs {
                    expected += run.saturating_sub(83);
                    run = 1;
                } else {
                    run += 1;
                }
            }
            expected += run.saturating_sub(83);
            prop_assert_eq!(windows.len(), expected);

            for w in &windows {
                let origin = ts.iter().position(|t| *t == w.origin_timestamp).unwrap();
                let start = origin + 1 - 72;
                for k in start + 1..start + 84 {
                    prop_assert!((ts[k] - ts[k - 1]).num_seconds() as f64 <= cfg.gap_tolerance_secs);
                }
            }
        }
    }
}
