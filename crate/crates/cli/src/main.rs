use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use forcelang::eval::Protocol;
use forcelang::models::Variant;

mod commands;
mod provider;

use provider::ProviderArgs;

/// Force/language translation toolkit.
#[derive(Debug, Parser)]
#[command(name = "forcelang", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic paired corpus and its manifest.
    GenData(GenDataArgs),
    /// Train one model variant on a corpus.
    Train(TrainArgs),
    /// Translate text to forces, or a force profile to a phrase.
    Translate(TranslateArgs),
    /// Run an evaluation protocol and write a report.
    Eval(EvalArgs),
    /// List the vocabulary, or export a hashing-provider embedding table.
    Vocab(VocabArgs),
    /// Split a corpus into train and test files.
    Split(SplitArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Output corpus (JSON lines).
    #[arg(long)]
    pub out: PathBuf,
    /// Manifest path; defaults to `<out>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub participants: u32,
    #[arg(long, default_value_t = 42)]
    pub phrase_to_force: usize,
    #[arg(long, default_value_t = 42)]
    pub force_to_phrase: usize,
    /// Direction and amplitude jitter, as a fraction.
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
}

#[derive(Debug, Clone, Args)]
pub struct TrainingArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Gaussian smoothing (grid samples) applied to decoded impulses.
    #[arg(long)]
    pub smoothing: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_parser = parse_variant)]
    pub variant: Variant,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// Loss history CSV; defaults to `<out>.loss.csv`.
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub training: TrainingArgs,
    #[command(flatten)]
    pub provider: ProviderArgs,
}

#[derive(Debug, Args)]
pub struct TranslateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Free text to translate into a force curve.
    #[arg(long)]
    pub text: Option<String>,
    /// Record id of a force profile in `--corpus`.
    #[arg(long, requires = "corpus")]
    pub profile: Option<String>,
    /// Force profile CSV with columns t,Fx,Fy,Fz.
    #[arg(long)]
    pub profile_csv: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Similarity threshold for matching text to a vocabulary phrase.
    #[arg(long, default_value_t = 0.6)]
    pub sigma: f64,
    /// Force CSV output; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub provider: ProviderArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_parser = parse_protocol)]
    pub protocol: Protocol,
    /// Comma-separated variant names.
    #[arg(long, value_delimiter = ',', value_parser = parse_variant, default_value = "dae_b,svm_knn")]
    pub variants: Vec<Variant>,
    #[arg(long, default_value_t = 5)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub training: TrainingArgs,
    #[command(flatten)]
    pub provider: ProviderArgs,
}

#[derive(Debug, Args)]
pub struct VocabArgs {
    /// Write an embedding table for every required text using the hashing provider.
    #[arg(long)]
    pub hashing_table: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub embed_seed: u64,
    /// Decimals per value in the exported table.
    #[arg(long, default_value_t = 8)]
    pub precision: usize,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Directory receiving train.jsonl and test.jsonl.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Test fraction for a random split.
    #[arg(long, default_value_t = 0.1)]
    pub fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Hold out every sample using this modifier.
    #[arg(long, conflicts_with = "holdout_direction")]
    pub holdout_modifier: Option<String>,
    /// Hold out every sample using this direction token.
    #[arg(long)]
    pub holdout_direction: Option<String>,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse()
}

fn parse_protocol(s: &str) -> Result<Protocol, String> {
    s.parse()
}

/// Bad arguments detected after parsing; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(UsageError(msg.into()).into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData(a) => commands::gen_data(a),
        Command::Train(a) => commands::train(a),
        Command::Translate(a) => commands::translate(a),
        Command::Eval(a) => commands::eval(a),
        Command::Vocab(a) => commands::vocab(a),
        Command::Split(a) => commands::split(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
