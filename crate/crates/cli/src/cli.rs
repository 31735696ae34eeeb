use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use recipegen::model::Variant;
use recipegen::oracle::SentenceSource;

#[derive(Debug, Parser)]
#[command(name = "recipegen", version, about = "Recipe generation from candidate video events")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Experiment config (JSON); defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic kitchen dataset.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Candidates per video.
        #[arg(long)]
        n_candidates: Option<usize>,
    },
    /// Train a model and write a checkpoint plus a CSV log.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Where the checkpoint is written.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// CSV training log (defaults to `<checkpoint>.log.csv`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_parser = parse_variant)]
        variant: Option<Variant>,
        #[arg(long)]
        n_candidates: Option<usize>,
        /// Continue from this checkpoint's parameters and optimizer state.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Greedy recipes for every video of a dataset.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Must match the checkpoint's variant when given.
        #[arg(long, value_parser = parse_variant)]
        variant: Option<Variant>,
        #[arg(long)]
        n_candidates: Option<usize>,
        /// Vocabulary file (JSON token list) that must match the checkpoint.
        #[arg(long)]
        vocab: Option<PathBuf>,
    },
    /// Score predictions against a dataset's reference recipes.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Oracle selection report, optionally swept over candidate budgets.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ModeArg::GtSentences)]
        mode: ModeArg,
        /// CSV of (bin, count) for the per-step oracle tIoU histogram.
        #[arg(long)]
        hist_out: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated candidate budgets, e.g. 10,25,50.
        #[arg(long, value_delimiter = ',')]
        n_candidates: Vec<usize>,
    },
    /// Train and evaluate every (variant, N, seed) cell; writes a CSV table.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', value_parser = parse_variant, default_value = "B,BI,BIV,BIVT")]
        variant: Vec<Variant>,
        #[arg(long, value_delimiter = ',')]
        n_candidates: Vec<usize>,
        /// Comma-separated seeds; defaults to the config's training seed.
        #[arg(long = "seeds", value_delimiter = ',')]
        seeds: Vec<u64>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Attached,
    GtSentences,
}

impl From<ModeArg> for SentenceSource {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Attached => SentenceSource::Attached,
            ModeArg::GtSentences => SentenceSource::GtSentences,
        }
    }
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse::<Variant>().map_err(|e| e.to_string())
}
