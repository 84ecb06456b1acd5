//! Genetic search over the two dysglycemia loss weights.
//!
//! Each generation keeps the better half of the population as parents and fills
//! the other half with children: the coordinate-wise mean of two distinct random
//! parents, perturbed by Gaussian noise and clipped to the bounds. Parents survive
//! unchanged, so the best fitness never gets worse from one generation to the next.
//! Fitness is a validation error; lower is better.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Thresholds;
use crate::error::{GlimmerError, Result};
use crate::eval::rmse;
use crate::loss::Objective;
use crate::nn::{predict, train, ArchConfig, TrainConfig};
use crate::pipeline::PreparedData;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub bounds: (f64, f64),
    pub mutation_std: f64,
    pub seed: u64,
    /// Epochs per fitness training run.
    pub fitness_epochs: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 20,
            generations: 25,
            bounds: (1.0, 10.0),
            mutation_std: 0.5,
            seed: 0,
            fitness_epochs: 5,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(GlimmerError::Config(m.into()));
        if self.population < 2 || !self.population.is_multiple_of(2) {
            return bad("population must be even and >= 2");
        }
        if self.generations == 0 {
            return bad("generations must be >= 1");
        }
        let (lo, hi) = self.bounds;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return bad("bounds must satisfy low < high");
        }
        if !(self.mutation_std.is_finite() && self.mutation_std > 0.0) {
            return bad("mutation_std must be positive");
        }
        if self.fitness_epochs == 0 {
            return bad("fitness_epochs must be >= 1");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub w_hypo: f64,
    pub w_hyper: f64,
    /// Validation RMSE in mg/dL once evaluated.
    pub fitness: Option<f64>,
}

impl Individual {
    pub fn new(w_hypo: f64, w_hyper: f64) -> Self {
        Individual {
            w_hypo,
            w_hyper,
            fitness: None,
        }
    }
}

/// One row of the per-generation log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationLog {
    pub generation: usize,
    /// Best individual seen so far.
    pub best: Individual,
    /// Mean fitness of the population formed in this generation.
    pub mean_fitness: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaResult {
    pub best: Individual,
    pub log: Vec<GenerationLog>,
    pub evaluations: usize,
}

impl GaResult {
    pub fn log_csv(&self) -> String {
        let mut s = String::from("generation,best_w_hypo,best_w_hyper,best_fitness,mean_fitness\n");
        for row in &self.log {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                row.generation,
                row.best.w_hypo,
                row.best.w_hyper,
                row.best.fitness.unwrap_or(f64::INFINITY),
                row.mean_fitness
            ));
        }
        s
    }
}

pub fn init_population<R: Rng>(cfg: &GaConfig, rng: &mut R) -> Vec<Individual> {
    let (lo, hi) = cfg.bounds;
    (0..cfg.population)
        .map(|_| {
            let w_hypo = rng.random_range(lo..=hi);
            let w_hyper = rng.random_range(lo..=hi);
            Individual::new(w_hypo, w_hyper)
        })
        .collect()
}

fn fitness_key(ind: &Individual) -> Result<f64> {
    match ind.fitness {
        Some(f) if f.is_nan() => Ok(f64::INFINITY),
        Some(f) => Ok(f),
        None => Err(GlimmerError::State(format!(
            "individual ({}, {}) has not been evaluated",
            ind.w_hypo, ind.w_hyper
        ))),
    }
}

/// Best half by ascending fitness; ties keep the earlier index.
pub fn select_parents(population: &[Individual]) -> Result<Vec<Individual>> {
    let mut keyed = population
        .iter()
        .enumerate()
        .map(|(i, ind)| Ok((fitness_key(ind)?, i)))
        .collect::<Result<Vec<_>>>()?;
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(keyed
        .iter()
        .take(population.len() / 2)
        .map(|&(_, i)| population[i])
        .collect())
}

pub fn clip(v: f64, bounds: (f64, f64)) -> f64 {
    v.clamp(bounds.0, bounds.1)
}

/// One child per parent. Noise std comes from `cfg.mutation_std` (0 disables it).
pub fn breed<R: Rng>(parents: &[Individual], rng: &mut R, cfg: &GaConfig) -> Result<Vec<Individual>> {
    if parents.len() < 2 {
        return Err(GlimmerError::State(format!(
            "breeding needs at least two parents, got {}",
            parents.len()
        )));
    }
    let noise = Normal::new(0.0, cfg.mutation_std)
        .map_err(|e| GlimmerError::Config(format!("mutation_std: {e}")))?;
    Ok((0..parents.len())
        .map(|_| {
            let a = rng.random_range(0..parents.len());
            let mut b = rng.random_range(0..parents.len() - 1);
            if b >= a {
                b += 1;
            }
            let (pa, pb) = (&parents[a], &parents[b]);
            let w_hypo = 0.5 * (pa.w_hypo + pb.w_hypo) + noise.sample(rng);
            let w_hyper = 0.5 * (pa.w_hyper + pb.w_hyper) + noise.sample(rng);
            Individual::new(clip(w_hypo, cfg.bounds), clip(w_hyper, cfg.bounds))
        })
        .collect())
}

/// Evaluates every individual without a fitness. Evaluations may run on the
/// current rayon pool; results are stored by index so scheduling cannot change them.
fn evaluate<F>(population: &mut [Individual], fitness_fn: &F) -> usize
where
    F: Fn(&Individual) -> Result<f64> + Sync,
{
    let pending: Vec<usize> = (0..population.len())
        .filter(|&i| population[i].fitness.is_none())
        .collect();
    let scores: Vec<f64> = pending
        .par_iter()
        .map(|&i| match fitness_fn(&population[i]) {
            Ok(f) if !f.is_nan() => f,
            _ => f64::INFINITY,
        })
        .collect();
    for (&i, f) in pending.iter().zip(&scores) {
        population[i].fitness = Some(*f);
    }
    pending.len()
}

/// Runs the search. Fitness errors count as +inf so the individual is culled.
pub fn run_ga<F>(cfg: &GaConfig, fitness_fn: F) -> Result<GaResult>
where
    F: Fn(&Individual) -> Result<f64> + Sync,
{
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut population = init_population(cfg, &mut rng);
    let mut evaluations = evaluate(&mut population, &fitness_fn);
    let mut best = best_of(&population, None);
    let mut log = Vec::with_capacity(cfg.generations);

    for generation in 1..=cfg.generations {
        let parents = select_parents(&population)?;
        let mut children = breed(&parents, &mut rng, cfg)?;
        evaluations += evaluate(&mut children, &fitness_fn);
        population = parents.into_iter().chain(children).collect();
        best = best_of(&population, Some(best));
        let mean_fitness =
            population.iter().map(|i| i.fitness.unwrap()).sum::<f64>() / population.len() as f64;
        log.push(GenerationLog {
            generation,
            best,
            mean_fitness,
        });
    }
    Ok(GaResult {
        best,
        log,
        evaluations,
    })
}

fn best_of(population: &[Individual], incumbent: Option<Individual>) -> Individual {
    let mut best = incumbent.unwrap_or(population[0]);
    for ind in population {
        if ind.fitness.unwrap() < best.fitness.unwrap() {
            best = *ind;
        }
    }
    best
}

/// Coordinate-wise mean of per-patient optima.
pub fn average_weights(per_patient_best: &[Individual]) -> Result<(f64, f64)> {
    if per_patient_best.is_empty() {
        return Err(GlimmerError::domain("cannot average an empty set of weights"));
    }
    let n = per_patient_best.len() as f64;
    let hypo = per_patient_best.iter().map(|i| i.w_hypo).sum::<f64>() / n;
    let hyper = per_patient_best.iter().map(|i| i.w_hyper).sum::<f64>() / n;
    Ok((hypo, hyper))
}

/// Analytic stand-in for training, minimized at (3, 2). Used to exercise the search itself.
pub fn surrogate_fitness(ind: &Individual) -> Result<f64> {
    Ok((ind.w_hypo - 3.0).powi(2) + (ind.w_hyper - 2.0).powi(2))
}

/// Trains a model with the individual's weights and scores validation RMSE in mg/dL.
pub fn training_fitness(
    ind: &Individual,
    data: &PreparedData,
    arch: &ArchConfig,
    base: &TrainConfig,
    thresholds: Thresholds,
) -> Result<f64> {
    let cfg = TrainConfig {
        objective: Objective::region_weighted(ind.w_hypo, ind.w_hyper, thresholds),
        ..base.clone()
    };
    let (params, _) = train(&data.train, &data.val, arch, &cfg)?;
    let preds = predict(&params, data.val.iter().map(|w| &w.x))?;
    let truth: Vec<f64> = data.val.iter().flat_map(|w| w.y.iter().copied()).collect();
    let pred: Vec<f64> = preds.into_iter().flatten().collect();
    rmse(&truth, &pred)
}
