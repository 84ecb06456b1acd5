//! Deterministic synthetic CGM/pump traces for tests and demos.
//!
//! Glucose is a 24 h sinusoid whose nightly trough dips below the hypo threshold,
//! plus a gamma-shaped excursion after each of three daily meals, a slow AR(1)
//! drift and sensor noise. Meals carry carbs and a matching bolus.

use std::f64::consts::PI;

use chrono::{Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{CgmRecord, Thresholds};

const STEPS_PER_DAY: usize = 288;
const MEAL_PEAK_MIN: f64 = 60.0;
/// mg/dL rise per gram of carbohydrate at the peak.
const CARB_SENSITIVITY: f64 = 2.2;
const CARB_RATIO: f64 = 10.0;
const MEAL_TIMES_MIN: [f64; 3] = [7.0 * 60.0, 12.5 * 60.0, 18.5 * 60.0];

pub fn generate_synthetic(seed: u64, days: usize, t: &Thresholds) -> Vec<CgmRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = STEPS_PER_DAY * days;
    let start = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();

    // Trough sits a little below t_hypo, afternoon crest well under t_hyper.
    let trough = t.t_hypo - 6.0;
    let crest = t.t_hyper - 40.0;
    let center = 0.5 * (trough + crest);
    let amplitude = 0.5 * (crest - trough);

    let mut carbs = vec![0.0; n];
    let mut bolus = vec![0.0; n];
    for day in 0..days {
        for base in MEAL_TIMES_MIN {
            let jitter = rng.random_range(-12i64..=12) as f64 * 5.0;
            let step = ((base + jitter) / 5.0) as usize + day * STEPS_PER_DAY;
            let grams = rng.random_range(30u32..=90) as f64;
            let dose_factor = rng.random_range(0.7..1.1);
            carbs[step] = grams;
            bolus[step] = (grams / CARB_RATIO * dose_factor * 10.0).round() / 10.0;
        }
    }

    let drift_noise = Normal::new(0.0, 2.0).unwrap();
    let sensor_noise = Normal::new(0.0, 3.0).unwrap();
    let mut drift = 0.0;
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let minute = (i * 5) as f64;
        let hour = (minute / 60.0) % 24.0;
        let baseline = center + amplitude * (2.0 * PI * (hour - 15.0) / 24.0).cos();

        let mut meal = 0.0;
        // Meal response decays to nothing within ~8 h (96 steps).
        for j in i.saturating_sub(96)..=i {
            if carbs[j] > 0.0 {
                let tau = ((i - j) * 5) as f64 / MEAL_PEAK_MIN;
                meal += CARB_SENSITIVITY * carbs[j] * tau * (1.0 - tau).exp();
            }
        }

        drift = 0.98 * drift + drift_noise.sample(&mut rng);
        let raw = baseline + meal + drift + sensor_noise.sample(&mut rng);
        let glucose = (raw.clamp(40.0, 400.0) * 10.0).round() / 10.0;

        let basal = if hour < 6.0 { 0.6 } else { 0.8 };
        records.push(CgmRecord {
            timestamp: start + Duration::minutes(5 * i as i64),
            glucose,
            basal,
            bolus: bolus[i],
            carbs: carbs[i],
        });
    }
    records
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{classify_region, write_csv, Region};
    use std::collections::HashSet;

    #[test]
    fn one_day_has_288_samples_at_five_minutes() {
        let recs = generate_synthetic(7, 1, &Thresholds::default());
        assert_eq!(recs.len(), 288);
        assert!(recs
            .windows(2)
            .all(|w| (w[1].timestamp - w[0].timestamp).num_seconds() == 300));
    }

    #[test]
    fn glucose_is_clamped() {
        for seed in 0..5 {
            let recs = generate_synthetic(seed, 5, &Thresholds::default());
            assert!(recs.iter().all(|r| (40.0..=400.0).contains(&r.glucose)));
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let t = Thresholds::default();
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_csv(&generate_synthetic(11, 3, &t), &mut a).unwrap();
        write_csv(&generate_synthetic(11, 3, &t), &mut b).unwrap();
        assert_eq!(a, b);
        let mut c = Vec::new();
        write_csv(&generate_synthetic(12, 3, &t), &mut c).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn all_regions_present_from_two_days() {
        let t = Thresholds::default();
        for seed in 0..20 {
            let regions: HashSet<Region> = generate_synthetic(seed, 2, &t)
                .iter()
                .map(|r| classify_region(r.glucose, &t).unwrap())
                .collect();
            assert_eq!(regions.len(), 3, "seed {seed}");
        }
    }

    #[test]
    fn three_meals_per_day_with_bolus() {
        let recs = generate_synthetic(3, 4, &Thresholds::default());
        let meals: Vec<&CgmRecord> = recs.iter().filter(|r| r.carbs > 0.0).collect();
        assert_eq!(meals.len(), 12);
        assert!(meals.iter().all(|r| r.bolus > 0.0));
    }
}
