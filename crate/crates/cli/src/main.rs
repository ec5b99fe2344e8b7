//! `dialign`: corpus divergence reports from the command line.
//!
//! Every subcommand reads an optional JSON config (`--config`), writes into
//! one output directory (`--out`) and takes all randomness from `--seed`.
//! Stages cache their results in the output directory, so later commands
//! reuse balanced corpora and trained spaces.

mod commands;
mod config;
mod error;
mod svg;
mod workspace;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::PipelineConfig;
use crate::error::CliResult;

#[derive(Parser)]
#[command(name = "dialign", version, about = "Lexical divergence between text communities")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Pipeline config file (JSON); defaults apply to missing fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for balancing, training and synthesis.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
pub enum Command {
    /// Build one corpus per channel from a comments JSONL file.
    Ingest {
        #[arg(long)]
        comments: Option<PathBuf>,
        #[arg(long = "channel")]
        channels: Vec<String>,
        /// Restrict to one UTC calendar year.
        #[arg(long)]
        year: Option<i32>,
        #[arg(long)]
        include_replies: bool,
        /// Keep comments from every user, not only each channel's majority users.
        #[arg(long)]
        no_user_filter: bool,
    },
    /// Download comments page by page (credential from DIALIGN_FETCH_TOKEN).
    Fetch {
        #[arg(long)]
        endpoint: String,
        #[arg(long)]
        channel: String,
        #[arg(long, default_value_t = 10)]
        pages: usize,
    },
    /// Token-balance the corpora and build the shared vocabularies.
    Balance,
    /// Train embedding spaces (all balanced corpora, or one file).
    Train {
        #[arg(long, requires = "output")]
        corpus: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Fit an orthogonal map between two spaces.
    Align {
        #[arg(long, requires = "tgt")]
        src: Option<PathBuf>,
        #[arg(long, requires = "src")]
        tgt: Option<PathBuf>,
        #[arg(long)]
        source: Option<String>,
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Translate one word with a fitted map.
    Translate {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
        #[arg(long)]
        word: String,
        /// Number of alternatives to list.
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Target vocabulary (token<TAB>count); defaults to the target space's
        /// non-stopword tokens.
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Use CSLS retrieval with this neighborhood size.
        #[arg(long)]
        csls: Option<usize>,
    },
    /// Directed similarity reports for one pair or every ordered pair.
    Similarity {
        #[arg(long, requires = "target")]
        source: Option<String>,
        #[arg(long, requires = "source")]
        target: Option<String>,
    },
    /// Misaligned pairs with context snippets.
    Misaligned {
        #[arg(long, requires = "target")]
        source: Option<String>,
        #[arg(long, requires = "source")]
        target: Option<String>,
        /// Pairs to print per direction.
        #[arg(long, default_value_t = 20)]
        limit: usize,
    },
    /// Pairwise similarity matrix.
    Matrix,
    /// Similarity as a function of the source vocabulary size.
    Sweep {
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Mean and standard deviation of the matrix over re-seeded runs.
    Multirun {
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Monthly disagreement series, paired t-tests and comment shares.
    Engagement {
        #[arg(long)]
        videos: Option<PathBuf>,
        #[arg(long)]
        comments: Option<PathBuf>,
        #[arg(long = "channel")]
        channels: Vec<String>,
        #[arg(long)]
        year: Option<i32>,
        #[arg(long)]
        min_videos: Option<usize>,
    },
    /// Generate a synthetic corpus pair with planted swaps.
    Synth {
        /// Randomly drawn planted pairs.
        #[arg(long, default_value_t = 0)]
        pairs: usize,
        /// Named pair `a|b`; words separated by spaces form a phrase.
        #[arg(long = "phrase")]
        phrases: Vec<String>,
        #[arg(long, default_value_t = 500_000)]
        tokens: usize,
        #[arg(long, default_value_t = 2_000)]
        vocab_size: usize,
        #[arg(long, default_value_t = 20)]
        topics: usize,
    },
    /// Collect existing artifacts into report.md.
    Report,
}

fn effective_config(global: &Global) -> CliResult<PipelineConfig> {
    let mut config = match &global.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    if let Some(out) = &global.out {
        config.output_dir = out.clone();
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = effective_config(&cli.global).and_then(|config| commands::run(cli.command, config));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", e.kind());
            ExitCode::from(e.exit_code())
        }
    }
}
