//! Corpus divergence measurement with cross-corpus word embedding alignment.
//!
//! Two text communities are treated as two "languages" written with the same
//! English words. Each gets its own skip-gram embedding space; the spaces are
//! aligned with an orthogonal map anchored on stopwords, and the share of
//! words that translate to themselves measures how alike the communities talk.
//! Words that translate to some *other* word are the misaligned pairs.

pub mod alignment;
pub mod corpus;
pub mod divergence;
pub mod embedding;
pub mod engagement;
pub mod error;
pub mod fetch;
pub mod ingest;
pub mod pipeline;
pub mod stats;
pub mod synthgen;
pub mod vocab;

pub use corpus::{Corpus, CorpusProvenance, Period};
pub use error::{Error, Result};
