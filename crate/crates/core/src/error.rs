use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("parse failure: {malformed} of {total} lines malformed (first bad line {first_line}: {reason})")]
    ParseFailure {
        malformed: usize,
        total: usize,
        first_line: usize,
        reason: String,
    },

    #[error("network error fetching page {page}: {message}")]
    Network { page: usize, message: String },

    #[error("corpus `{0}` has no documents")]
    EmptyCorpus(String),

    #[error("cannot balance corpus `{corpus}`: reached {reached} tokens, target {target}")]
    BalanceFailure {
        corpus: String,
        reached: usize,
        target: usize,
    },

    #[error("vocabulary underflow: {eligible} eligible tokens, {required} required")]
    VocabularyUnderflow { eligible: usize, required: usize },

    #[error("no token reaches min_count {min_count}")]
    EmptyVocabulary { min_count: usize },

    #[error("unknown token `{0}`")]
    UnknownToken(String),

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("insufficient anchors: {found} usable seed pairs, at least 3 needed")]
    InsufficientAnchors { found: usize },

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("no source token could be evaluated")]
    EmptyEvaluation,

    #[error("degenerate variance: all paired differences are identical")]
    DegenerateVariance,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("run {run} failed: {source}")]
    Run {
        run: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Short machine-readable tag, used by the CLI's structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::ParseFailure { .. } => "parse-failure",
            Error::Network { .. } => "network",
            Error::EmptyCorpus(_) => "empty-corpus",
            Error::BalanceFailure { .. } => "balance-failure",
            Error::VocabularyUnderflow { .. } => "vocabulary-underflow",
            Error::EmptyVocabulary { .. } => "empty-vocabulary",
            Error::UnknownToken(_) => "unknown-token",
            Error::Format { .. } => "format",
            Error::InsufficientAnchors { .. } => "insufficient-anchors",
            Error::DimensionMismatch(..) => "dimension-mismatch",
            Error::Numeric(_) => "numeric",
            Error::EmptyEvaluation => "empty-evaluation",
            Error::DegenerateVariance => "degenerate-variance",
            Error::Config(_) => "config",
            Error::Consistency(_) => "consistency",
            Error::Run { .. } => "run",
        }
    }
}
