use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use glimmer::data::{generate_synthetic, read_csv_file, write_csv, CgmRecord, Thresholds};
use glimmer::eval::{ceg_pairs_csv, evaluate_runs, seed_runs, EvalReport, Forecaster, SeedRun};
use glimmer::ga::{average_weights, run_ga, surrogate_fitness, training_fitness, GaConfig, Individual};
use glimmer::loss::Objective;
use glimmer::nn::{load_params, save_params, ArchConfig, Checkpoint, ConvSpec, TrainConfig};
use glimmer::pipeline::{
    forecast_csv, forecast_records, prepare_many, train_checkpoint, DataSource, PrepareConfig, PreparedData,
};
use rayon::prelude::*;

use crate::{CliError, DataArgs, EvalCmd, LossKind, ModelArgs, PredictCmd, SynthArgs, ThresholdArgs, TrainArgs, TrainCmd, TuneCmd};

type CliResult<T> = Result<T, CliError>;

fn thresholds(a: &ThresholdArgs) -> CliResult<Thresholds> {
    Thresholds::new(a.t_hypo, a.t_hyper).map_err(|e| CliError::usage(e.to_string()))
}

fn arch(a: &ModelArgs) -> CliResult<ArchConfig> {
    let conv_layers = a
        .conv
        .split(',')
        .map(|pair| {
            let (f, k) = pair
                .trim()
                .split_once(':')
                .ok_or_else(|| CliError::usage(format!("--conv entry `{pair}` is not filters:kernel")))?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| CliError::usage(format!("--conv entry `{pair}` is not filters:kernel")))
            };
            Ok(ConvSpec {
                filters: parse(f)?,
                kernel: parse(k)?,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let arch = ArchConfig {
        conv_layers,
        lstm_units: a.lstm_units,
        dense_hidden: a.dense_hidden,
        ..ArchConfig::default()
    };
    arch.validate().map_err(|e| CliError::usage(e.to_string()))?;
    Ok(arch)
}

fn objective(a: &TrainArgs, t: Thresholds) -> Objective {
    match a.loss {
        LossKind::Plain => Objective::Mae,
        LossKind::Weighted => Objective::region_weighted(a.w_hypo, a.w_hyper, t),
    }
}

fn train_config(a: &TrainArgs, objective: Objective) -> CliResult<TrainConfig> {
    let cfg = TrainConfig {
        batch_size: a.batch_size,
        epochs: a.epochs,
        learning_rate: a.lr,
        seed: a.seed,
        objective,
    };
    cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
    Ok(cfg)
}

fn seeds(a: &TrainArgs) -> Vec<u64> {
    (0..a.runs).map(|i| a.seed + i).collect()
}

fn require_file(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::usage(format!("{} does not exist", path.display())))
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| data_error(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| data_error(format!("cannot write {}: {e}", path.display())))
}

fn data_error(message: String) -> CliError {
    CliError { code: 1, message }
}

fn read_records(path: &Path) -> CliResult<Vec<CgmRecord>> {
    read_csv_file(path).map_err(|e| data_error(format!("{}: {e}", path.display())))
}

enum Records {
    Whole(Vec<CgmRecord>),
    Split(Vec<CgmRecord>, Vec<CgmRecord>),
}

impl Records {
    fn source(&self) -> DataSource<'_> {
        match self {
            Records::Whole(r) => DataSource::Unpartitioned(r),
            Records::Split(train, test) => DataSource::Partitioned { train, test },
        }
    }
}

/// A unit of work: one output subdirectory (if any) and the data feeding it.
struct Group {
    name: Option<String>,
    records: Vec<Records>,
}

impl Group {
    fn dir(&self, root: &Path) -> PathBuf {
        match &self.name {
            Some(n) => root.join(n),
            None => root.to_path_buf(),
        }
    }

    fn label(&self) -> &str {
        self.name.as_deref().unwrap_or("all")
    }

    fn prepare(&self, cfg: &PrepareConfig) -> CliResult<PreparedData> {
        let sources: Vec<DataSource<'_>> = self.records.iter().map(Records::source).collect();
        prepare_many(&sources, cfg).map_err(|e| {
            let e = CliError::from(e);
            CliError {
                message: format!("{}: {}", self.label(), e.message),
                ..e
            }
        })
    }
}

fn load_groups(a: &DataArgs) -> CliResult<Vec<Group>> {
    if let Some(path) = &a.data {
        require_file(path)?;
        return Ok(vec![Group {
            name: None,
            records: vec![Records::Whole(read_records(path)?)],
        }]);
    }
    if let (Some(train), Some(test)) = (&a.train_file, &a.test_file) {
        require_file(train)?;
        require_file(test)?;
        return Ok(vec![Group {
            name: None,
            records: vec![Records::Split(read_records(train)?, read_records(test)?)],
        }]);
    }
    let Some(pattern) = &a.glob else {
        return Err(CliError::usage("one of --data, --train-file/--test-file or --glob is required"));
    };
    let mut paths: Vec<PathBuf> = glob::glob(pattern)
        .map_err(|e| CliError::usage(format!("bad --glob pattern: {e}")))?
        .filter_map(|p| p.ok())
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::usage(format!("--glob `{pattern}` matched no files")));
    }
    let patients = paths
        .iter()
        .map(|p| {
            let name = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "patient".into());
            Ok((name, Records::Whole(read_records(p)?)))
        })
        .collect::<CliResult<Vec<_>>>()?;
    if a.pooled {
        Ok(vec![Group {
            name: None,
            records: patients.into_iter().map(|(_, r)| r).collect(),
        }])
    } else {
        Ok(patients
            .into_iter()
            .map(|(name, r)| Group {
                name: Some(name),
                records: vec![r],
            })
            .collect())
    }
}

fn prepare_config(a: &DataArgs, arch: &ArchConfig, t: Thresholds) -> PrepareConfig {
    PrepareConfig {
        thresholds: t,
        train_stride: a.stride as usize,
        ..PrepareConfig::for_arch(arch)
    }
}

pub fn synth(a: &SynthArgs) -> CliResult<()> {
    let t = thresholds(&a.thresholds)?;
    let records = generate_synthetic(a.seed, a.days as usize, &t);
    if let Some(dir) = a.out.parent() {
        fs::create_dir_all(dir).map_err(|e| data_error(format!("cannot create {}: {e}", dir.display())))?;
    }
    let file = fs::File::create(&a.out).map_err(|e| data_error(format!("cannot write {}: {e}", a.out.display())))?;
    write_csv(&records, BufWriter::new(file))?;
    println!("wrote {} records to {}", records.len(), a.out.display());
    Ok(())
}

/// Trains every seed in parallel and writes `checkpoint_seed<S>.json` and `history_seed<S>.csv`.
fn train_seeds(data: &PreparedData, arch: &ArchConfig, base: &TrainConfig, seeds: &[u64], dir: &Path, label: &str) -> CliResult<()> {
    let results = seeds
        .par_iter()
        .map(|&seed| {
            let cfg = TrainConfig { seed, ..base.clone() };
            train_checkpoint(data, arch, &cfg)
        })
        .collect::<Result<Vec<_>, _>>()?;
    for (seed, (ckpt, history)) in seeds.iter().zip(results) {
        let mut buf = Vec::new();
        save_params(&ckpt, &mut buf)?;
        write(&dir.join(format!("checkpoint_seed{seed}.json")), buf)?;
        write(&dir.join(format!("history_seed{seed}.csv")), history.to_csv())?;
        let best = &history.epochs[history.best_epoch - 1];
        println!(
            "{label} seed {seed}: best epoch {} val loss {:.4} ({} train / {} val windows)",
            history.best_epoch,
            best.val_loss,
            data.train.len(),
            data.val.len()
        );
    }
    Ok(())
}

pub fn train(a: &TrainCmd) -> CliResult<()> {
    let t = thresholds(&a.data.thresholds)?;
    let arch = arch(&a.model)?;
    let base = train_config(&a.train, objective(&a.train, t))?;
    let prep = prepare_config(&a.data, &arch, t);
    for group in load_groups(&a.data)? {
        let data = group.prepare(&prep)?;
        train_seeds(&data, &arch, &base, &seeds(&a.train), &group.dir(&a.out), group.label())?;
    }
    Ok(())
}

fn weights_json(ind: &Individual, extra: serde_json::Value) -> String {
    let mut v = serde_json::json!({
        "w_hypo": ind.w_hypo,
        "w_hyper": ind.w_hyper,
    });
    if let (Some(obj), serde_json::Value::Object(more)) = (v.as_object_mut(), extra) {
        if let Some(f) = ind.fitness {
            obj.insert("fitness".into(), f.into());
        }
        obj.extend(more);
    }
    format!("{}\n", serde_json::to_string_pretty(&v).expect("json"))
}

pub fn tune(a: &TuneCmd) -> CliResult<()> {
    let t = thresholds(&a.data.thresholds)?;
    let arch = arch(&a.model)?;
    let ga = GaConfig {
        population: a.population,
        generations: a.generations,
        bounds: (a.w_min, a.w_max),
        mutation_std: a.mutation_std,
        seed: a.train.seed,
        fitness_epochs: a.fitness_epochs,
    };
    ga.validate().map_err(|e| CliError::usage(e.to_string()))?;

    if a.surrogate {
        let res = run_ga(&ga, surrogate_fitness)?;
        write(&a.out.join("ga_log.csv"), res.log_csv())?;
        write(
            &a.out.join("best_weights.json"),
            weights_json(&res.best, serde_json::json!({ "evaluations": res.evaluations, "surrogate": true })),
        )?;
        println!("best weights ({}, {}) fitness {}", res.best.w_hypo, res.best.w_hyper, res.best.fitness.unwrap_or(f64::NAN));
        return Ok(());
    }

    let fitness_cfg = train_config(
        &TrainArgs {
            epochs: a.fitness_epochs,
            ..a.train.clone()
        },
        Objective::Mae,
    )?;
    let prep = prepare_config(&a.data, &arch, t);
    let groups = load_groups(&a.data)?;
    let mut prepared = Vec::with_capacity(groups.len());
    let mut bests = Vec::with_capacity(groups.len());
    for group in &groups {
        let data = group.prepare(&prep)?;
        let res = run_ga(&ga, |ind: &Individual| training_fitness(ind, &data, &arch, &fitness_cfg, t))?;
        let dir = group.dir(&a.out);
        write(&dir.join("ga_log.csv"), res.log_csv())?;
        write(
            &dir.join("best_weights.json"),
            weights_json(&res.best, serde_json::json!({ "evaluations": res.evaluations })),
        )?;
        println!(
            "{}: best weights ({}, {}) validation RMSE {}",
            group.label(),
            res.best.w_hypo,
            res.best.w_hyper,
            res.best.fitness.unwrap_or(f64::NAN)
        );
        bests.push(res.best);
        prepared.push(data);
    }

    let (w_hypo, w_hyper) = average_weights(&bests)?;
    if groups.len() > 1 {
        let names: Vec<&str> = groups.iter().map(Group::label).collect();
        let avg = Individual::new(w_hypo, w_hyper);
        write(
            &a.out.join("best_weights.json"),
            weights_json(&avg, serde_json::json!({ "patients": names })),
        )?;
        println!("averaged weights ({w_hypo}, {w_hyper})");
    }

    if a.retrain {
        let base = train_config(&a.train, Objective::region_weighted(w_hypo, w_hyper, t))?;
        for (group, data) in groups.iter().zip(&prepared) {
            train_seeds(data, &arch, &base, &seeds(&a.train), &group.dir(&a.out), group.label())?;
        }
    }
    Ok(())
}

fn seed_from_name(path: &Path) -> Option<u64> {
    path.file_name()?
        .to_str()?
        .strip_prefix("checkpoint_seed")?
        .strip_suffix(".json")?
        .parse()
        .ok()
}

fn list_checkpoints(dir: &Path) -> CliResult<Vec<(u64, PathBuf)>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::usage(format!("cannot read {}: {e}", dir.display())))?;
    let mut found: Vec<(u64, PathBuf)> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter_map(|p| seed_from_name(&p).map(|s| (s, p)))
        .collect();
    found.sort();
    if found.is_empty() {
        return Err(CliError::usage(format!("no checkpoint_seed<S>.json files in {}", dir.display())));
    }
    Ok(found)
}

fn load_checkpoint(path: &Path, arch: Option<&ArchConfig>) -> CliResult<Checkpoint> {
    let file = fs::File::open(path).map_err(|e| CliError::usage(format!("cannot open {}: {e}", path.display())))?;
    load_params(std::io::BufReader::new(file), arch).map_err(|e| {
        let mut err = CliError::checkpoint(e);
        err.message = format!("{}: {}", path.display(), err.message);
        err
    })
}

fn write_report(dir: &Path, stem: &str, report: &EvalReport) -> CliResult<()> {
    write(&dir.join(format!("{stem}.json")), report.to_json()? + "\n")?;
    write(&dir.join(format!("{stem}.csv")), report.to_csv())
}

pub fn eval(a: &EvalCmd) -> CliResult<()> {
    let t = thresholds(&a.data.thresholds)?;
    let arch = arch(&a.model)?;
    let prep = prepare_config(&a.data, &arch, t);
    let groups = load_groups(&a.data)?;
    if groups.len() > 1 && a.checkpoint_dir.is_none() {
        return Err(CliError::usage("per-patient evaluation needs --checkpoint-dir"));
    }
    if a.checkpoint.is_empty() == a.checkpoint_dir.is_none() {
        return Err(CliError::usage("give either --checkpoint (repeatable) or --checkpoint-dir"));
    }

    let mut pooled: Vec<SeedRun> = Vec::new();
    for group in &groups {
        let files = match &a.checkpoint_dir {
            Some(root) => list_checkpoints(&group.dir(root))?,
            None => a
                .checkpoint
                .iter()
                .enumerate()
                .map(|(i, p)| (seed_from_name(p).unwrap_or(i as u64), p.clone()))
                .collect(),
        };
        let mut ckpts = Vec::with_capacity(files.len());
        for (seed, path) in &files {
            let ckpt = load_checkpoint(path, Some(&arch))?;
            if ckpt.thresholds != t {
                return Err(CliError {
                    code: 4,
                    message: format!(
                        "{} was trained with thresholds {:?}, evaluation uses {:?}",
                        path.display(),
                        ckpt.thresholds,
                        t
                    ),
                });
            }
            ckpts.push((*seed, ckpt));
        }
        let data = group.prepare(&prep)?;
        let models: Vec<(u64, &dyn Forecaster)> = ckpts.iter().map(|(s, c)| (*s, c as &dyn Forecaster)).collect();
        let runs = seed_runs(&models, &data.test)?;
        let report = evaluate_runs(&runs, &t)?;
        let dir = group.dir(&a.out);
        write_report(&dir, "report", &report)?;
        for run in &runs {
            write(
                &dir.join(format!("ceg_pairs_seed{}.csv", run.seed)),
                ceg_pairs_csv(&run.truth, &run.pred)?,
            )?;
        }
        print_summary(group.label(), &report);

        if groups.len() > 1 {
            if pooled.is_empty() {
                pooled = runs;
            } else {
                if pooled.iter().map(|r| r.seed).ne(runs.iter().map(|r| r.seed)) {
                    return Err(CliError::usage("patients must share the same checkpoint seeds for pooled reporting"));
                }
                for (acc, run) in pooled.iter_mut().zip(runs) {
                    acc.truth.extend(run.truth);
                    acc.pred.extend(run.pred);
                }
            }
        }
    }
    if groups.len() > 1 {
        let report = evaluate_runs(&pooled, &t)?;
        write_report(&a.out, "report_pooled", &report)?;
        print_summary("pooled", &report);
    }
    Ok(())
}

fn print_summary(label: &str, report: &EvalReport) {
    let show = |name: &str| match report.metric(name) {
        Some(m) => match (m.mean, m.std) {
            (Some(mean), Some(std)) => format!("{name} {mean:.3} ± {std:.3}"),
            _ => format!("{name} n/a"),
        },
        None => format!("{name} n/a"),
    };
    println!(
        "{label}: {} | {} | {} | {} ({} seeds, {} samples)",
        show("rmse"),
        show("mae"),
        show("rmse_dysglycemia"),
        show("ceg_a"),
        report.seeds.len(),
        report.n_samples
    );
}

pub fn predict(a: &PredictCmd) -> CliResult<()> {
    require_file(&a.data)?;
    let ckpt = load_checkpoint(&a.checkpoint, None)?;
    let records = read_records(&a.data)?;
    let forecasts = forecast_records(&ckpt, &records)?;
    let arch = ckpt.params.arch();
    if forecasts.is_empty() {
        return Err(data_error(format!(
            "{} has no run of {} contiguous samples to forecast from",
            a.data.display(),
            arch.input_len + arch.output_len
        )));
    }
    write(&a.out, forecast_csv(&forecasts, arch.output_len))?;
    println!("wrote {} forecasts to {}", forecasts.len(), a.out.display());
    Ok(())
}
