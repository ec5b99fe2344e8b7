//! End-to-end analysis: balance, vocabulary, training, alignment and
//! divergence reports for a set of corpora under one seed.

use serde::{Deserialize, Serialize};

use crate::alignment::{build_seed_lexicon, fit, AlignmentMap, RetrievalMode, Translations, Translator};
use crate::corpus::Corpus;
use crate::divergence::{
    average_sweeps, check_sizes, misaligned_pairs, similarity, similarity_neighborhood, sweep_prefixes,
    DivergenceReport, MultirunStats, SimilarityMatrix, SweepPoint, DEFAULT_MAX_SNIPPETS, DEFAULT_NEIGHBORHOOD_K,
};
use crate::embedding::{train, EmbeddingSpace, TrainConfig};
use crate::error::{Error, Result};
use crate::ingest::token_balance;
use crate::vocab::{
    build_trigram_vocab, build_vocab, merge_trigrams, stopwords, TrigramSet, Vocabulary, DEFAULT_SOURCE_SIZE,
    DEFAULT_TARGET_SIZE,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub train: TrainConfig,
    pub source_size: usize,
    pub target_size: usize,
    pub mode: RetrievalMode,
    pub trigram: bool,
    /// Neighborhood size for the Jaccard measure; `None` skips it.
    pub neighborhood_k: Option<usize>,
    pub max_snippets: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            train: TrainConfig::default(),
            source_size: DEFAULT_SOURCE_SIZE,
            target_size: DEFAULT_TARGET_SIZE,
            mode: RetrievalMode::Nn,
            trigram: false,
            neighborhood_k: Some(DEFAULT_NEIGHBORHOOD_K),
            max_snippets: DEFAULT_MAX_SNIPPETS,
        }
    }
}

/// Everything one seeded pass produces.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub seed: u64,
    pub config: AnalysisConfig,
    /// Balanced (and, in trigram mode, merged) corpora.
    pub corpora: Vec<Corpus>,
    pub source_vocab: Vocabulary,
    pub target_vocab: Vocabulary,
    pub spaces: Vec<EmbeddingSpace>,
}

/// Balanced (and, in trigram mode, merged) corpora with their shared
/// vocabularies, ready for training.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub corpora: Vec<Corpus>,
    pub source_vocab: Vocabulary,
    pub target_vocab: Vocabulary,
}

/// Balances `corpora` under `balance_seed` and builds the shared
/// vocabularies.
pub fn prepare(corpora: &[Corpus], config: &AnalysisConfig, balance_seed: u64) -> Result<Prepared> {
    if config.source_size > config.target_size {
        return Err(Error::Config(
            "source vocabulary cannot exceed the target vocabulary".into(),
        ));
    }
    let balanced = token_balance(corpora, balance_seed)?;
    let (source_vocab, target_vocab, corpora) = if config.trigram {
        let (s, t) = build_trigram_vocab(&balanced, config.source_size, config.target_size)?;
        let set = TrigramSet::from_vocab(&t);
        let merged = balanced.iter().map(|c| merge_trigrams(c, &set)).collect();
        (s, t, merged)
    } else {
        let (s, t) = build_vocab(&balanced, config.source_size, config.target_size)?;
        (s, t, balanced)
    };
    Ok(Prepared {
        corpora,
        source_vocab,
        target_vocab,
    })
}

/// Trains one space per prepared corpus with `seed`.
pub fn train_prepared(prepared: Prepared, config: &AnalysisConfig, seed: u64) -> Result<PipelineRun> {
    let train_config = TrainConfig {
        seed,
        ..config.train.clone()
    };
    let spaces = prepared
        .corpora
        .iter()
        .map(|c| train(c, &train_config))
        .collect::<Result<Vec<_>>>()?;
    Ok(PipelineRun {
        seed,
        config: config.clone(),
        corpora: prepared.corpora,
        source_vocab: prepared.source_vocab,
        target_vocab: prepared.target_vocab,
        spaces,
    })
}

/// Balances `corpora` jointly, builds the shared vocabularies and trains one
/// space per corpus. `seed` drives both the balance subsample and training.
pub fn run_pipeline(corpora: &[Corpus], config: &AnalysisConfig, seed: u64) -> Result<PipelineRun> {
    train_prepared(prepare(corpora, config, seed)?, config, seed)
}

impl PipelineRun {
    pub fn ids(&self) -> Vec<String> {
        self.spaces.iter().map(|s| s.language_id.clone()).collect()
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.spaces
            .iter()
            .position(|s| s.language_id == id)
            .ok_or_else(|| Error::Config(format!("no language `{id}` in this run")))
    }

    pub fn align(&self, i: usize, j: usize) -> Result<AlignmentMap> {
        let (src, tgt) = (&self.spaces[i], &self.spaces[j]);
        fit(src, tgt, &build_seed_lexicon(src, tgt, stopwords())?)
    }

    /// Translations of the first `size` source-vocabulary tokens.
    pub fn translations(&self, i: usize, j: usize, map: &AlignmentMap, size: usize) -> Result<Translations> {
        let tr = Translator::new(
            map,
            &self.spaces[i],
            &self.spaces[j],
            &self.target_vocab,
            self.config.mode,
        )?;
        Ok(tr.translate_all(self.source_vocab.tokens().take(size)))
    }

    /// Full report for `i → j`, with snippets and, when configured, the
    /// neighborhood measure.
    pub fn report(&self, i: usize, j: usize) -> Result<DivergenceReport> {
        let map = self.align(i, j)?;
        let tr = self.translations(i, j, &map, self.source_vocab.len())?;
        let mut report = similarity(&tr, &self.source_vocab)?;
        report.source_id = self.spaces[i].language_id.clone();
        report.target_id = self.spaces[j].language_id.clone();
        report.config.target_size = self.target_vocab.len();
        report.config.trigram = self.config.trigram;
        report.config.seed = Some(self.seed);
        if let Some(k) = self.config.neighborhood_k {
            report.similarity_neighborhood = Some(similarity_neighborhood(&self.spaces[i], &self.spaces[j], &tr, k)?);
        }
        report.misaligned = misaligned_pairs(&report, (&self.corpora[i], &self.corpora[j]), self.config.max_snippets);
        Ok(report)
    }

    pub fn matrix(&self) -> Result<SimilarityMatrix> {
        let mut m = SimilarityMatrix::new(self.ids());
        for (i, j) in m.off_diagonal().collect::<Vec<_>>() {
            let map = self.align(i, j)?;
            let tr = self.translations(i, j, &map, self.source_vocab.len())?;
            m.cells[i][j] = Some(similarity(&tr, &self.source_vocab)?.similarity);
        }
        Ok(m)
    }

    /// Similarity of `i → j` over each source prefix size.
    pub fn sweep_curve(&self, i: usize, j: usize, sizes: &[usize]) -> Result<Vec<f64>> {
        check_sizes(sizes, self.target_vocab.len())?;
        if let Some(&s) = sizes.iter().find(|&&s| s > self.source_vocab.len()) {
            return Err(Error::Config(format!(
                "sweep size {s} exceeds the source vocabulary ({})",
                self.source_vocab.len()
            )));
        }
        let map = self.align(i, j)?;
        let largest = *sizes.last().unwrap();
        let tr = self.translations(i, j, &map, largest)?;
        sweep_prefixes(&tr, &self.source_vocab, self.target_vocab.len(), sizes)
    }
}

/// Runs the pipeline with seeds `seed..seed + runs`.
pub fn run_many(corpora: &[Corpus], config: &AnalysisConfig, seed: u64, runs: usize) -> Result<Vec<PipelineRun>> {
    (0..runs)
        .map(|r| {
            run_pipeline(corpora, config, seed.wrapping_add(r as u64)).map_err(|e| Error::Run {
                run: r,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Mean and standard deviation of every matrix cell over `runs` re-seeded
/// pipeline runs.
pub fn multirun_stats(corpora: &[Corpus], config: &AnalysisConfig, seed: u64, runs: usize) -> Result<MultirunStats> {
    if runs < 2 {
        return Err(Error::Config("multi-run statistics need at least two runs".into()));
    }
    let done = run_many(corpora, config, seed, runs)?;
    matrices_of(&done)
}

pub fn matrices_of(runs: &[PipelineRun]) -> Result<MultirunStats> {
    let matrices = runs
        .iter()
        .enumerate()
        .map(|(r, run)| {
            run.matrix().map_err(|e| Error::Run {
                run: r,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    MultirunStats::from_runs(matrices)
}

/// Similarity per source-vocabulary size, averaged over both directions of
/// every language pair and over all runs.
pub fn vocab_sweep(runs: &[PipelineRun], sizes: &[usize]) -> Result<Vec<SweepPoint>> {
    let mut curves = Vec::new();
    for run in runs {
        let n = run.spaces.len();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    curves.push(run.sweep_curve(i, j, sizes)?);
                }
            }
        }
    }
    Ok(average_sweeps(sizes, &curves))
}
