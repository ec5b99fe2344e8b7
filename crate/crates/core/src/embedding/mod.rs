//! Monolingual word embeddings: skip-gram with negative sampling, optional
//! hashed character n-gram features, neighbor queries and a text format.

mod io;
mod knn;
mod sgns;
mod subword;
mod train;

use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use knn::{cosine, normalize, select_top_k, top_k_cosine, VectorMatrix};
pub use sgns::{sgns_gradient, SgnsGradient};
pub use subword::{fnv1a, ngram_buckets, ngrams};
pub use train::train;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum SubwordConfig {
    Off,
    On { min_n: usize, max_n: usize, buckets: usize },
}

impl Default for SubwordConfig {
    fn default() -> Self {
        SubwordConfig::On {
            min_n: 3,
            max_n: 6,
            buckets: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub dimension: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f32,
    pub min_count: usize,
    /// Frequent-word subsampling threshold.
    pub sample: f64,
    pub subword: SubwordConfig,
    pub seed: u64,
    /// Single worker, fixed event order, bit-reproducible output.
    pub deterministic: bool,
    /// Worker count in fast mode.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dimension: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.05,
            min_count: 5,
            sample: 1e-3,
            subword: SubwordConfig::default(),
            seed: 0,
            deterministic: true,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.dimension == 0 {
            return fail("dimension must be at least 1");
        }
        if self.window == 0 {
            return fail("window must be at least 1");
        }
        if self.negatives == 0 {
            return fail("negatives must be at least 1");
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1");
        }
        if !(self.learning_rate > 0.0) {
            return fail("learning rate must be positive");
        }
        if let SubwordConfig::On { min_n, max_n, buckets } = self.subword {
            if min_n == 0 || min_n > max_n {
                return fail("subword n-gram bounds must satisfy 1 <= min_n <= max_n");
            }
            if buckets == 0 {
                return fail("subword bucket count must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceProvenance {
    pub config: Option<TrainConfig>,
    pub corpus_tokens: usize,
    /// Mean SGNS loss per training event, one entry per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Hashed n-gram vectors used to compose vectors for unseen tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct SubwordTable {
    pub min_n: usize,
    pub max_n: usize,
    pub buckets: usize,
    /// `buckets x dimension`, row-major.
    pub vectors: Vec<f32>,
}

impl SubwordTable {
    fn compose(&self, token: &str, dim: usize) -> Vec<f32> {
        let ids = ngram_buckets(token, self.min_n, self.max_n, self.buckets);
        let mut out = vec![0.0; dim];
        for &b in &ids {
            let row = &self.vectors[b as usize * dim..(b as usize + 1) * dim];
            out.iter_mut().zip(row).for_each(|(o, r)| *o += r);
        }
        if !ids.is_empty() {
            let inv = 1.0 / ids.len() as f32;
            out.iter_mut().for_each(|o| *o *= inv);
        }
        out
    }
}

/// Token vectors of one trained language.
#[derive(Debug, Clone)]
pub struct EmbeddingSpace {
    pub language_id: String,
    dimension: usize,
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
    /// `tokens.len() x dimension`, row-major.
    vectors: Vec<f32>,
    subword: Option<SubwordTable>,
    pub provenance: SpaceProvenance,
    unit: OnceLock<VectorMatrix>,
}

impl EmbeddingSpace {
    /// Builds a space from explicit vectors. Token order is taken as the
    /// vocabulary order.
    pub fn from_parts(
        language_id: impl Into<String>,
        dimension: usize,
        tokens: Vec<String>,
        vectors: Vec<f32>,
    ) -> Result<Self> {
        if dimension == 0 || vectors.len() != tokens.len() * dimension {
            return Err(Error::DimensionMismatch(vectors.len(), tokens.len() * dimension));
        }
        let counts = vec![0; tokens.len()];
        Ok(Self::assemble(
            language_id.into(),
            dimension,
            tokens,
            counts,
            vectors,
            None,
            SpaceProvenance {
                config: None,
                corpus_tokens: 0,
                epoch_losses: Vec::new(),
            },
        ))
    }

    pub(crate) fn assemble(
        language_id: String,
        dimension: usize,
        tokens: Vec<String>,
        counts: Vec<u64>,
        vectors: Vec<f32>,
        subword: Option<SubwordTable>,
        provenance: SpaceProvenance,
    ) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        EmbeddingSpace {
            language_id,
            dimension,
            tokens,
            counts,
            index,
            vectors,
            subword,
            provenance,
            unit: OnceLock::new(),
        }
    }

    pub fn with_subword(mut self, table: SubwordTable) -> Self {
        self.subword = Some(table);
        self
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn subword(&self) -> Option<&SubwordTable> {
        self.subword.as_ref()
    }

    pub fn row(&self, idx: usize) -> &[f32] {
        &self.vectors[idx * self.dimension..(idx + 1) * self.dimension]
    }

    pub fn raw_vectors(&self) -> &[f32] {
        &self.vectors
    }

    /// Stored vector for in-vocabulary tokens; mean of n-gram bucket vectors
    /// for unseen tokens when subword features are on; `None` otherwise.
    pub fn vector(&self, token: &str) -> Option<Vec<f32>> {
        if let Some(i) = self.index_of(token) {
            return Some(self.row(i).to_vec());
        }
        self.subword.as_ref().map(|s| s.compose(token, self.dimension))
    }

    /// True when [`Self::vector`] yields a vector for `token`.
    pub fn resolves(&self, token: &str) -> bool {
        self.contains(token) || self.subword.is_some()
    }

    /// Unit-normalized copies of every in-vocabulary vector.
    pub fn unit_vectors(&self) -> &VectorMatrix {
        self.unit
            .get_or_init(|| VectorMatrix::normalized(self.dimension, self.vectors.clone()))
    }

    /// The `k` in-vocabulary tokens closest to `token` by cosine, excluding
    /// `token` itself; ties go to the earlier vocabulary entry.
    pub fn neighbors(&self, token: &str, k: usize) -> Result<Vec<(String, f32)>> {
        let q = self
            .vector(token)
            .ok_or_else(|| Error::UnknownToken(token.to_string()))?;
        let exclude = self.index_of(token);
        let hits = top_k_cosine(self.unit_vectors(), &[normalize(q)], k, |_, b| Some(b) == exclude);
        Ok(hits
            .into_iter()
            .next()
            .unwrap_or_default()
            .into_iter()
            .map(|(i, s)| (self.tokens[i].clone(), s))
            .collect())
    }
}
