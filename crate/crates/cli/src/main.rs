//! `dicoh` — dialogue coherence pipeline.
//!
//! Subcommands: `prepare` (raw corpus -> canonical splits), `perturb`
//! (canonical corpus -> pair datasets), `train`, `eval`, `score`, `inspect`.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::CliError;

/// Environment variable naming the default data root; run directories are
/// created under `<root>/runs` when `--out` is omitted.
pub const DATA_ROOT_ENV: &str = "DICOH_DATA_ROOT";

#[derive(Parser)]
#[command(
    name = "dicoh",
    about = "Dialogue coherence ranking: data preparation, perturbation benchmarks, training, and evaluation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse raw DailyDialog-style files into the canonical corpus layout.
    Prepare(PrepareArgs),
    /// Build perturbation pair datasets for one problem domain.
    Perturb(PerturbArgs),
    /// Train a model on a pair dataset.
    Train(TrainArgs),
    /// Evaluate checkpoints or baselines on pair datasets.
    Eval(EvalArgs),
    /// Score dialogues from a canonical file with a checkpoint.
    Score(ScoreArgs),
    /// Dump word- and utterance-level attention weights.
    Inspect(InspectArgs),
}

#[derive(clap::Args)]
pub(crate) struct PrepareArgs {
    /// Raw text file (one dialogue per line, `__eou__`-separated); the corpus
    /// is split 80/10/10 with the seed.
    #[arg(long, requires = "acts", conflicts_with = "train_text")]
    text: Option<PathBuf>,
    /// Act file matching --text (one line of integers 1-4 per dialogue).
    #[arg(long)]
    acts: Option<PathBuf>,
    /// Official pre-split layout: per-split text and act files.
    #[arg(long, requires_all = ["train_acts", "val_text", "val_acts", "test_text", "test_acts"])]
    train_text: Option<PathBuf>,
    #[arg(long)]
    train_acts: Option<PathBuf>,
    #[arg(long)]
    val_text: Option<PathBuf>,
    #[arg(long)]
    val_acts: Option<PathBuf>,
    #[arg(long)]
    test_text: Option<PathBuf>,
    #[arg(long)]
    test_acts: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: a fresh run directory under the data root).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
pub(crate) struct PerturbArgs {
    /// Canonical corpus directory (from `prepare`).
    #[arg(long)]
    corpus: PathBuf,
    /// Problem domain: uo, ui, ur, or euo.
    #[arg(long)]
    domain: String,
    /// Perturbations per dialogue.
    #[arg(long)]
    per_dialogue: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
pub(crate) struct TrainArgs {
    /// Pair dataset directory (from `perturb`).
    #[arg(long)]
    pairs: PathBuf,
    /// Training regime: s-dicoh, m-dicoh, s-dap, or m-dap.
    #[arg(long)]
    regime: String,
    /// Pretrained embedding file (token + 300 floats per line). Omitted:
    /// random initialization at --emb-dim.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    emb_dim: Option<usize>,
    #[arg(long)]
    utt_hidden: Option<usize>,
    #[arg(long)]
    dial_hidden: Option<usize>,
    /// Train this many models with consecutive seeds and report mean ± std.
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
pub(crate) struct EvalArgs {
    /// Pair dataset files; one column of the report per file.
    #[arg(long, required = true, num_args = 1..)]
    pairs: Vec<PathBuf>,
    /// Checkpoints to evaluate (repeat for multi-seed mean ± std).
    #[arg(long, num_args = 0..)]
    checkpoint: Vec<PathBuf>,
    /// Baseline instead of a checkpoint: random or cosim.
    #[arg(long)]
    model: Option<String>,
    /// Pretrained embedding file (required by the cosim baseline).
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Stop word list for cosim (default: the bundled English list).
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
pub(crate) struct ScoreArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Canonical dialogue file to score.
    #[arg(long)]
    dialogues: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
pub(crate) struct InspectArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Canonical dialogue file.
    #[arg(long)]
    dialogues: PathBuf,
    /// Restrict the dump to one dialogue id.
    #[arg(long)]
    id: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Prepare(args) => commands::prepare::run(args),
        Command::Perturb(args) => commands::perturb::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Score(args) => commands::score::run(args),
        Command::Inspect(args) => commands::inspect::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

pub(crate) type CliResult = Result<(), CliError>;
