//! Command-line front end: every command reads its inputs, derives all
//! randomness from one master seed and writes its outputs plus a `run.json`
//! manifest into the `--out` directory.

use std::fmt;
use std::path::PathBuf;

use aam_core::evaluation::SWEEP_K;
use aam_core::training::DEFAULT_K_MAX;
use aam_core::ModelKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod experiment;
pub mod manifest;

pub use commands::{
    cmd_ablate, cmd_attention, cmd_evaluate, cmd_generate, cmd_sweep, cmd_train, AblateOutput, AttentionOutput,
    EvaluateOutput, GenerateOutput, SweepOutput, TrainOutput,
};
pub use experiment::ExperimentConfig;
pub use manifest::{FoldAccess, RunManifest, MANIFEST_FILE};

pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Parser)]
#[command(name = "aam", version, about = "Attentive aggregation models for irregular smartphone test histories")]
pub struct Cli {
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic cohort CSV.
    Generate(GenerateArgs),
    /// Fit one model kind and save its checkpoint.
    Train(TrainArgs),
    /// Score a cohort with a checkpoint and report metrics with intervals.
    Evaluate(EvaluateArgs),
    /// AUPR as a function of the maximum number of tests.
    Sweep(SweepArgs),
    /// F1 with each test type removed in turn.
    Ablate(AblateArgs),
    /// Per-test-instance attention of one participant.
    Attention(AttentionArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// Generator settings; defaults apply to keys not given.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the seed of the config.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    pub data: PathBuf,
    #[arg(long, value_parser = parse_kind)]
    pub model: ModelKind,
    #[arg(long, default_value_t = 50)]
    pub budget: usize,
    #[arg(long = "k-max", default_value_t = DEFAULT_K_MAX)]
    pub k_max: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FoldChoice {
    /// The held-out fold recomputed from the checkpoint's split seed.
    Test,
    /// Every participant passing the minimum-test filter.
    All,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    pub checkpoint: PathBuf,
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = FoldChoice::Test)]
    pub fold: FoldChoice,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    pub data: PathBuf,
    /// Fixed hyperparameters for every retraining.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, value_parser = parse_kind, value_delimiter = ',', default_value = "aam,mean_agg")]
    pub model: Vec<ModelKind>,
    #[arg(long = "k-list", value_delimiter = ',', default_values_t = SWEEP_K)]
    pub k_list: Vec<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct AblateArgs {
    pub data: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, value_parser = parse_kind, default_value = "aam")]
    pub model: ModelKind,
    #[arg(long = "k-max", default_value_t = DEFAULT_K_MAX)]
    pub k_max: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct AttentionArgs {
    pub checkpoint: PathBuf,
    pub data: PathBuf,
    #[arg(long)]
    pub participant: String,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: aam_core::Error| e.to_string())
}

/// Usage errors exit with 2, everything else with 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<aam_core::Error> for CliError {
    fn from(e: aam_core::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

/// Runs one parsed command inside a pool of `--threads` workers.
pub fn run(cli: Cli) -> Result<RunManifest, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::usage(format!("--threads: {e}")))?;
    pool.install(|| match cli.command {
        Command::Generate(a) => cmd_generate(&a).map(|o| o.manifest),
        Command::Train(a) => cmd_train(&a).map(|o| o.manifest),
        Command::Evaluate(a) => cmd_evaluate(&a).map(|o| o.manifest),
        Command::Sweep(a) => cmd_sweep(&a).map(|o| o.manifest),
        Command::Ablate(a) => cmd_ablate(&a).map(|o| o.manifest),
        Command::Attention(a) => cmd_attention(&a).map(|o| o.manifest),
    })
}
