mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use baomi::dsp::CepstralKind;
use baomi::train::ModelKind;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "baomi", version, about = "Heart murmur classification with bandit-weighted cross-attention fusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract MFCC or LFCC vectors for every labelled recording in a manifest.
    Features(FeaturesArgs),
    /// Five-fold cross-validated training and evaluation.
    Train(TrainArgs),
    /// Print a saved report as a table.
    Report(ReportArgs),
    /// Write penultimate-layer activations of a saved model to CSV.
    ExportEmbeddings(ExportArgs),
}

#[derive(Args)]
struct FeaturesArgs {
    /// CSV with columns recording_id,wav_path,label.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_parser = parse_kind)]
    kind: CepstralKind,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_parser = parse_model)]
    model: ModelKind,
    /// Feature file for branch A (the only branch for fcn and cnn).
    #[arg(long)]
    a: PathBuf,
    /// Feature file for branch B; required by the fusion models.
    #[arg(long)]
    b: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for the report, checkpoints and CSV files.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    heads: Option<usize>,
    #[arg(long)]
    head_dim: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Run a bandit update every N batches.
    #[arg(long)]
    bandit_every: Option<usize>,
    /// Use one set of head weights for both attention directions.
    #[arg(long)]
    shared_head_weights: bool,
    /// Feed raw feature values instead of standardised ones.
    #[arg(long)]
    no_standardize: bool,
    /// Also write each fold's test-set embeddings.
    #[arg(long)]
    embeddings: bool,
}

#[derive(Args)]
struct ReportArgs {
    report: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    /// Checkpoint path without extension, e.g. out/fold0.
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_kind(s: &str) -> Result<CepstralKind, String> {
    s.parse().map_err(|e: baomi::Error| e.to_string())
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: baomi::Error| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Features(a) => commands::features(a),
        Command::Train(a) => commands::train(a),
        Command::Report(a) => commands::report(a),
        Command::ExportEmbeddings(a) => commands::export_embeddings(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
