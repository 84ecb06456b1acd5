//! `glimmer`: synthesize CGM data, train and tune forecasters, evaluate, predict.
//!
//! Exit codes: 0 success, 1 data error, 2 usage error, 3 numeric error,
//! 4 checkpoint error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use glimmer::GlimmerError;

#[derive(Parser, Debug)]
#[command(name = "glimmer", version, about = "Blood glucose forecasting with region-weighted losses")]
struct Cli {
    /// Flat `key = value` file of flag defaults; command-line flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a deterministic synthetic CGM/pump CSV.
    #[command(args_override_self = true)]
    Synth(SynthArgs),
    /// Train one model per seed; writes checkpoints and per-epoch histories.
    #[command(args_override_self = true)]
    Train(TrainCmd),
    /// Search the hypo/hyper loss weights with the genetic algorithm.
    #[command(args_override_self = true)]
    Tune(TuneCmd),
    /// Score checkpoints on the test split; writes JSON and CSV reports.
    #[command(args_override_self = true)]
    Eval(EvalCmd),
    /// Forecast the next horizon for every full window of a CSV.
    #[command(args_override_self = true)]
    Predict(PredictCmd),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 60, value_parser = clap::value_parser!(u64).range(1..))]
    pub days: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
}

#[derive(Args, Debug, Clone)]
pub struct ThresholdArgs {
    #[arg(long, default_value_t = 70.0)]
    pub t_hypo: f64,
    #[arg(long, default_value_t = 180.0)]
    pub t_hyper: f64,
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Un-partitioned CSV; the last 20% becomes the test set.
    #[arg(long, conflicts_with_all = ["train_file", "glob"])]
    pub data: Option<PathBuf>,
    /// Training CSV of a pre-partitioned dataset (needs --test-file).
    #[arg(long, requires = "test_file", conflicts_with = "glob")]
    pub train_file: Option<PathBuf>,
    /// Held-out CSV of a pre-partitioned dataset.
    #[arg(long, requires = "train_file")]
    pub test_file: Option<PathBuf>,
    /// Per-patient mode: every matching CSV is one un-partitioned patient.
    #[arg(long)]
    pub glob: Option<String>,
    /// With --glob, treat all patients as one pooled dataset.
    #[arg(long, requires = "glob")]
    pub pooled: bool,
    /// Window stride for the training and validation sets.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub stride: u64,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Convolution stack as comma-separated `filters:kernel` pairs.
    #[arg(long, default_value = "32:4,16:4,8:4")]
    pub conv: String,
    #[arg(long, default_value_t = 8)]
    pub lstm_units: usize,
    /// Width of an extra hidden dense layer; 0 disables it.
    #[arg(long, default_value_t = 0)]
    pub dense_hidden: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LossKind {
    /// Region-weighted absolute error.
    Weighted,
    /// Global mean absolute error (baseline).
    Plain,
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 48)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// First seed; runs use consecutive seeds from here.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub runs: u64,
    #[arg(long, value_enum, default_value_t = LossKind::Weighted)]
    pub loss: LossKind,
    #[arg(long, default_value_t = 3.296)]
    pub w_hypo: f64,
    #[arg(long, default_value_t = 2.382)]
    pub w_hyper: f64,
}

#[derive(Args, Debug)]
pub struct TrainCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, default_value = "glimmer-out")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TuneCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, default_value_t = 20)]
    pub population: usize,
    #[arg(long, default_value_t = 25)]
    pub generations: usize,
    #[arg(long, default_value_t = 0.5)]
    pub mutation_std: f64,
    #[arg(long, default_value_t = 1.0)]
    pub w_min: f64,
    #[arg(long, default_value_t = 10.0)]
    pub w_max: f64,
    /// Training epochs per fitness evaluation.
    #[arg(long, default_value_t = 5)]
    pub fitness_epochs: usize,
    /// Score individuals with an analytic bowl centered at (3, 2) instead of training.
    #[arg(long)]
    pub surrogate: bool,
    /// Retrain with the winning weights at the full --epochs/--runs budget.
    #[arg(long)]
    pub retrain: bool,
    #[arg(long, default_value = "glimmer-out")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Checkpoint file; repeat for several seeds.
    #[arg(long)]
    pub checkpoint: Vec<PathBuf>,
    /// Directory holding `checkpoint_seed<S>.json` files (per-patient subdirectories with --glob).
    #[arg(long)]
    pub checkpoint_dir: Option<PathBuf>,
    #[arg(long, default_value = "glimmer-out")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PredictCmd {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// CSV of recent samples.
    #[arg(long)]
    pub data: PathBuf,
    /// Forecast CSV to write.
    #[arg(long)]
    pub out: PathBuf,
}

/// Error carried to `main` together with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    pub fn checkpoint(e: GlimmerError) -> Self {
        CliError {
            code: 4,
            message: e.to_string(),
        }
    }
}

impl From<GlimmerError> for CliError {
    fn from(e: GlimmerError) -> Self {
        let code = match &e {
            GlimmerError::Config(_) => 2,
            GlimmerError::NonFinite(_) | GlimmerError::Numeric { .. } => 3,
            GlimmerError::Version { .. } | GlimmerError::Corrupt(_) | GlimmerError::Shape(_) => 4,
            _ => 1,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("GLIMMER_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| CliError::usage(format!("GLIMMER_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::usage(format!("thread pool: {e}")))
}

fn run() -> Result<(), CliError> {
    let args = config::expand(std::env::args_os().collect(), &Cli::command()).map_err(CliError::usage)?;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return Err(CliError {
                code: code as u8,
                message: String::new(),
            });
        }
    };
    init_threads()?;
    match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Train(a) => commands::train(&a),
        Command::Tune(a) => commands::tune(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Predict(a) => commands::predict(&a),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !e.message.is_empty() {
                eprintln!("error: {}", e.message);
            }
            ExitCode::from(e.code)
        }
    }
}
