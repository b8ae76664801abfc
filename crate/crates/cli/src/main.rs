//! `threadforge`: staged rumour-detection pipeline.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error.

mod commands;
mod config;
mod manifest;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Bad flags, bad config: exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(name = "threadforge", version, about = "Rumour detection on reply-tree threads")]
pub struct Cli {
    /// TOML config; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read a PHEME-style archive into canonical threads (JSON lines).
    Ingest(IngestArgs),
    /// Check a threads file and print per-event label counts.
    Validate(ValidateArgs),
    /// Oversample every event to label balance.
    Augment(AugmentArgs),
    /// Train one model on every thread of a threads file.
    Train(TrainArgs),
    /// Leave-one-event-out evaluation.
    Eval(EvalArgs),
    /// Leave-one-event-out evaluation on time-truncated test threads.
    EarlyEval(EarlyEvalArgs),
    /// Plot early-detection curves and print a summary.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Archive root holding `<event>-all-rnr-threads` directories.
    #[arg(long)]
    pub raw: Option<PathBuf>,
    /// binary (rumour / non-rumour) or ternary (veracity).
    #[arg(long, default_value = "binary")]
    pub scheme: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long = "input")]
    pub input: Option<PathBuf>,
    /// Also write the report as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fail unless every event is label-balanced.
    #[arg(long)]
    pub require_balanced: bool,
}

#[derive(Debug, Args, Clone, Default)]
pub struct StrategyArgs {
    /// none, random or nonrandom.
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub p_aug: Option<f64>,
    #[arg(long)]
    pub fold_cap: Option<u32>,
    #[arg(long)]
    pub token_rate: Option<f64>,
    /// CND1 substitution table; without it replacements come from the thread's own words.
    #[arg(long)]
    pub candidates: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct ModelArgs {
    /// gcn or gat.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub mlp_hidden: Option<usize>,
    /// directed or symmetrized.
    #[arg(long)]
    pub adjacency: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct EmbeddingArgs {
    /// EMB1 embedding table. Without it tweets get hashed bag-of-words vectors.
    #[arg(long)]
    pub emb: Option<PathBuf>,
    /// Width of hashed vectors.
    #[arg(long)]
    pub hash_dim: Option<usize>,
    /// Use hashed vectors for texts missing from `--emb`.
    #[arg(long)]
    pub fallback_hash: bool,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long = "input")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub strategy: StrategyArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long = "input")]
    pub input: Option<PathBuf>,
    /// Checkpoint path; a JSON sidecar goes to `<out>.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub emb: EmbeddingArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Threads file; augmented copies in it are used for training only.
    #[arg(long = "input")]
    pub input: Option<PathBuf>,
    /// Precomputed output of `augment`.
    #[arg(long)]
    pub augmented: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub strategy: StrategyArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub emb: EmbeddingArgs,
}

#[derive(Debug, Args)]
pub struct EarlyEvalArgs {
    #[command(flatten)]
    pub eval: EvalArgs,
    /// Comma-separated delays in hours.
    #[arg(long, value_delimiter = ',')]
    pub schedule: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// One or more `curve.tsv` files from `early-eval`.
    #[arg(long = "curve", required = true)]
    pub curves: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
