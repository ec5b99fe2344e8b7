//! Divergence measures between aligned spaces: the share of self-translating
//! words, neighborhood overlap, misaligned pairs with corpus evidence, and
//! aggregation over language pairs and runs.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::alignment::{build_seed_lexicon, fit, RetrievalMode, Translations, Translator};
use crate::corpus::Corpus;
use crate::embedding::{normalize, top_k_cosine, EmbeddingSpace};
use crate::error::{Error, Result};
use crate::vocab::{stopwords, Vocabulary};

pub const DEFAULT_NEIGHBORHOOD_K: usize = 10;
pub const DEFAULT_MAX_SNIPPETS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisalignedPair {
    pub source: String,
    pub target: String,
    pub cosine: f32,
    /// `score(target) − score(source)` in the target space; `None` when the
    /// source token is not in the target vocabulary.
    pub margin: Option<f32>,
    pub source_snippets: Vec<String>,
    pub target_snippets: Vec<String>,
}

impl MisalignedPair {
    pub fn source_absent(&self) -> bool {
        self.margin.is_none()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub source_size: usize,
    pub target_size: usize,
    pub mode: RetrievalMode,
    pub trigram: bool,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub source_id: String,
    pub target_id: String,
    pub similarity: f64,
    pub similarity_neighborhood: Option<f64>,
    pub evaluated: usize,
    pub self_translated: usize,
    pub misaligned_count: usize,
    pub skipped: usize,
    /// Evaluated source tokens in source-vocabulary order.
    pub evaluated_tokens: Vec<String>,
    pub skipped_tokens: Vec<String>,
    pub misaligned: Vec<MisalignedPair>,
    pub config: ReportConfig,
}

impl DivergenceReport {
    pub fn is_misaligned(&self, token: &str) -> bool {
        self.misaligned.iter().any(|p| p.source == token)
    }

    pub fn translation_of(&self, token: &str) -> Option<&str> {
        if let Some(p) = self.misaligned.iter().find(|p| p.source == token) {
            return Some(&p.target);
        }
        self.evaluated_tokens
            .iter()
            .find(|t| t.as_str() == token)
            .map(String::as_str)
    }

    /// `source,target,score,margin`; margin is empty when the source token is
    /// absent from the target vocabulary.
    pub fn misaligned_csv(&self) -> String {
        let mut out = String::from("source,target,score,margin\n");
        for p in &self.misaligned {
            let margin = p.margin.map(|m| format!("{m:.6}")).unwrap_or_default();
            out.push_str(&format!("{},{},{:.6},{}\n", p.source, p.target, p.cosine, margin));
        }
        out
    }
}

/// Percentage of evaluated source tokens that translate to themselves.
/// Skipped tokens are left out of the denominator and reported separately.
pub fn similarity(translations: &Translations, source_vocab: &Vocabulary) -> Result<DivergenceReport> {
    let mut evaluated_tokens = Vec::with_capacity(translations.results.len());
    let mut self_translated = 0;
    let mut misaligned = Vec::new();
    for r in &translations.results {
        if !source_vocab.contains(&r.source) {
            return Err(Error::Consistency(format!(
                "translated token `{}` is not in the source vocabulary",
                r.source
            )));
        }
        evaluated_tokens.push(r.source.clone());
        if r.is_self() {
            self_translated += 1;
        } else {
            misaligned.push(MisalignedPair {
                source: r.source.clone(),
                target: r.target.clone(),
                cosine: r.cosine,
                margin: r.self_score.map(|s| r.score - s),
                source_snippets: Vec::new(),
                target_snippets: Vec::new(),
            });
        }
    }
    let evaluated = evaluated_tokens.len();
    if evaluated == 0 {
        return Err(Error::EmptyEvaluation);
    }
    sort_pairs(&mut misaligned);
    let mode = translations.results[0].mode;
    Ok(DivergenceReport {
        source_id: String::new(),
        target_id: String::new(),
        similarity: 100.0 * self_translated as f64 / evaluated as f64,
        similarity_neighborhood: None,
        evaluated,
        self_translated,
        misaligned_count: misaligned.len(),
        skipped: translations.skipped.len(),
        evaluated_tokens,
        skipped_tokens: translations.skipped.iter().map(|s| s.token.clone()).collect(),
        misaligned,
        config: ReportConfig {
            source_size: source_vocab.len(),
            mode,
            ..ReportConfig::default()
        },
    })
}

fn sort_pairs(pairs: &mut [MisalignedPair]) {
    pairs.sort_by(|a, b| {
        b.cosine
            .partial_cmp(&a.cosine)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.source.cmp(&b.source))
    });
}

fn neighborhoods(space: &EmbeddingSpace, tokens: &[&str], k: usize) -> Result<Vec<HashSet<usize>>> {
    let mut queries = Vec::with_capacity(tokens.len());
    let mut own = Vec::with_capacity(tokens.len());
    for t in tokens {
        let v = space.vector(t).ok_or_else(|| Error::UnknownToken(t.to_string()))?;
        queries.push(normalize(v));
        own.push(space.index_of(t));
    }
    let hits = top_k_cosine(space.unit_vectors(), &queries, k, |q, row| own[q] == Some(row));
    Ok(hits
        .into_iter()
        .map(|h| h.into_iter().map(|(i, _)| i).collect())
        .collect())
}

/// Mean Jaccard overlap (×100) between each evaluated source token's `k`
/// nearest neighbors in the source space and its translation's `k` nearest
/// neighbors in the target space.
pub fn similarity_neighborhood(
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    translations: &Translations,
    k: usize,
) -> Result<f64> {
    if translations.results.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let sources: Vec<&str> = translations.results.iter().map(|r| r.source.as_str()).collect();
    let targets: Vec<&str> = translations.results.iter().map(|r| r.target.as_str()).collect();
    let ns = neighborhoods(src, &sources, k)?;
    let nt = neighborhoods(tgt, &targets, k)?;
    let mut total = 0.0;
    for (a, b) in ns.iter().zip(&nt) {
        let a: HashSet<&str> = a.iter().map(|&i| src.tokens()[i].as_str()).collect();
        let b: HashSet<&str> = b.iter().map(|&i| tgt.tokens()[i].as_str()).collect();
        let union = a.union(&b).count();
        if union > 0 {
            total += a.intersection(&b).count() as f64 / union as f64;
        }
    }
    Ok(100.0 * total / ns.len() as f64)
}

/// First `max` documents containing `token`, joined with spaces.
pub fn snippets(corpus: &Corpus, token: &str, max: usize) -> Vec<String> {
    corpus
        .documents()
        .iter()
        .filter(|d| d.iter().any(|t| t == token))
        .take(max)
        .map(|d| d.join(" "))
        .collect()
}

/// The report's misaligned pairs with snippets mined from the source corpus
/// (for the source token) and the target corpus (for the target token).
pub fn misaligned_pairs(
    report: &DivergenceReport,
    corpora: (&Corpus, &Corpus),
    max_snippets: usize,
) -> Vec<MisalignedPair> {
    let mut pairs = report.misaligned.clone();
    for p in &mut pairs {
        p.source_snippets = snippets(corpora.0, &p.source, max_snippets);
        p.target_snippets = snippets(corpora.1, &p.target, max_snippets);
    }
    sort_pairs(&mut pairs);
    pairs
}

/// Directed similarity between every ordered pair of languages; the
/// diagonal is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub ids: Vec<String>,
    /// `cells[i][j]` is the similarity of `i → j`.
    pub cells: Vec<Vec<Option<f64>>>,
}

impl SimilarityMatrix {
    pub fn new(ids: Vec<String>) -> Self {
        let n = ids.len();
        SimilarityMatrix {
            ids,
            cells: vec![vec![None; n]; n],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.cells[i][j]
    }

    pub fn off_diagonal(&self) -> impl Iterator<Item = (usize, usize)> {
        let n = self.ids.len();
        (0..n).flat_map(move |i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
    }

    pub fn to_csv(&self) -> String {
        csv_grid(&self.ids, |i, j| {
            self.cells[i][j].map(|v| format!("{v:.4}")).unwrap_or_default()
        })
    }
}

/// Fits one map per ordered pair of spaces and fills the directed
/// similarity matrix over the shared vocabularies.
pub fn pairwise_matrix(
    spaces: &[&EmbeddingSpace],
    source_vocab: &Vocabulary,
    target_vocab: &Vocabulary,
    mode: RetrievalMode,
) -> Result<SimilarityMatrix> {
    if spaces.len() < 2 {
        return Err(Error::Config("a similarity matrix needs at least two languages".into()));
    }
    let mut m = SimilarityMatrix::new(spaces.iter().map(|s| s.language_id.clone()).collect());
    for (i, j) in m.off_diagonal().collect::<Vec<_>>() {
        let (src, tgt) = (spaces[i], spaces[j]);
        let map = fit(src, tgt, &build_seed_lexicon(src, tgt, stopwords())?)?;
        let tr = Translator::new(&map, src, tgt, target_vocab, mode)?.translate_all(source_vocab.tokens());
        m.cells[i][j] = Some(similarity(&tr, source_vocab)?.similarity);
    }
    Ok(m)
}

fn csv_grid(ids: &[String], cell: impl Fn(usize, usize) -> String) -> String {
    let mut out = String::from("source");
    for id in ids {
        out.push(',');
        out.push_str(id);
    }
    out.push('\n');
    for (i, id) in ids.iter().enumerate() {
        out.push_str(id);
        for j in 0..ids.len() {
            out.push(',');
            out.push_str(&cell(i, j));
        }
        out.push('\n');
    }
    out
}

/// Mean and sample standard deviation per matrix cell across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultirunStats {
    pub ids: Vec<String>,
    pub runs: usize,
    pub mean: Vec<Vec<Option<f64>>>,
    pub std: Vec<Vec<Option<f64>>>,
    pub per_run: Vec<SimilarityMatrix>,
}

impl MultirunStats {
    pub fn from_runs(matrices: Vec<SimilarityMatrix>) -> Result<Self> {
        if matrices.len() < 2 {
            return Err(Error::Config("multi-run statistics need at least two runs".into()));
        }
        let ids = matrices[0].ids.clone();
        if matrices.iter().any(|m| m.ids != ids) {
            return Err(Error::Consistency("runs disagree on language ids".into()));
        }
        let n = ids.len();
        let mut mean = vec![vec![None; n]; n];
        let mut std = vec![vec![None; n]; n];
        for i in 0..n {
            for j in 0..n {
                let values: Vec<f64> = matrices.iter().filter_map(|m| m.cells[i][j]).collect();
                if values.len() == matrices.len() {
                    let (m, s) = mean_std(&values);
                    mean[i][j] = Some(m);
                    std[i][j] = Some(s);
                }
            }
        }
        Ok(MultirunStats {
            ids,
            runs: matrices.len(),
            mean,
            std,
            per_run: matrices,
        })
    }

    /// Cells as `mean ± std`.
    pub fn to_csv(&self) -> String {
        csv_grid(&self.ids, |i, j| match (self.mean[i][j], self.std[i][j]) {
            (Some(m), Some(s)) => format!("{m:.4} ± {s:.4}"),
            _ => String::new(),
        })
    }
}

/// Sample mean and standard deviation (n − 1 denominator).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub source_size: usize,
    /// Mean over directions and runs.
    pub similarity: f64,
    pub values: Vec<f64>,
}

/// Similarity restricted to the first `size` source tokens for each size.
/// `translations` must cover at least the largest prefix, in source
/// vocabulary order.
pub fn sweep_prefixes(
    translations: &Translations,
    source_vocab: &Vocabulary,
    target_size: usize,
    sizes: &[usize],
) -> Result<Vec<f64>> {
    check_sizes(sizes, target_size)?;
    sizes
        .iter()
        .map(|&size| {
            let prefix = source_vocab.prefix(size);
            let subset = Translations {
                results: translations
                    .results
                    .iter()
                    .filter(|r| prefix.contains(&r.source))
                    .cloned()
                    .collect(),
                skipped: translations
                    .skipped
                    .iter()
                    .filter(|s| prefix.contains(&s.token))
                    .cloned()
                    .collect(),
            };
            similarity(&subset, &prefix).map(|r| r.similarity)
        })
        .collect()
}

pub fn check_sizes(sizes: &[usize], target_size: usize) -> Result<()> {
    if sizes.is_empty() {
        return Err(Error::Config("vocabulary sweep needs at least one size".into()));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("sweep sizes must be strictly ascending".into()));
    }
    if let Some(&s) = sizes.iter().find(|&&s| s > target_size || s == 0) {
        return Err(Error::Config(format!(
            "sweep size {s} is outside 1..={target_size} (the target vocabulary size)"
        )));
    }
    Ok(())
}

/// Averages per-direction sweep curves point by point.
pub fn average_sweeps(sizes: &[usize], curves: &[Vec<f64>]) -> Vec<SweepPoint> {
    sizes
        .iter()
        .enumerate()
        .map(|(k, &size)| {
            let values: Vec<f64> = curves.iter().map(|c| c[k]).collect();
            SweepPoint {
                source_size: size,
                similarity: values.iter().sum::<f64>() / values.len().max(1) as f64,
                values,
            }
        })
        .collect()
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("source_size,similarity\n");
    for p in points {
        out.push_str(&format!("{},{:.4}\n", p.source_size, p.similarity));
    }
    out
}
