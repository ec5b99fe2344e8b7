//! Orthogonal alignment of two embedding spaces and cross-space word
//! translation.
//!
//! The map `W` solves the orthogonal Procrustes problem over a seed lexicon
//! of identical stopword pairs: with unit rows `X` (source) and `Y` (target),
//! `W = U Vᵀ` where `U Σ Vᵀ = Xᵀ Y`. A source word is translated by rotating
//! its vector with `W` and retrieving the nearest target-vocabulary word by
//! cosine, or by the CSLS score when hubness correction is requested.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::embedding::{normalize, select_top_k, EmbeddingSpace, VectorMatrix};
use crate::error::{Error, Result};
use crate::vocab::{StopwordSet, Vocabulary};

pub const MIN_SEED_PAIRS: usize = 3;
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_ALTERNATIVES: usize = 10;
pub const DEFAULT_CSLS_K: usize = 10;

const SVD_EPS: f64 = 1e-14;
const SVD_MAX_ITER: usize = 10_000;
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedLexicon {
    pub pairs: Vec<(String, String)>,
    /// Stopwords that could not be resolved in one of the spaces.
    pub dropped: Vec<String>,
}

impl SeedLexicon {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Identity pairs over every stopword both spaces can produce a vector for.
pub fn build_seed_lexicon(src: &EmbeddingSpace, tgt: &EmbeddingSpace, stopwords: &StopwordSet) -> Result<SeedLexicon> {
    if src.dimension() != tgt.dimension() {
        return Err(Error::DimensionMismatch(src.dimension(), tgt.dimension()));
    }
    let (pairs, dropped): (Vec<&str>, Vec<&str>) = stopwords.iter().partition(|w| src.resolves(w) && tgt.resolves(w));
    if pairs.len() < MIN_SEED_PAIRS {
        return Err(Error::InsufficientAnchors { found: pairs.len() });
    }
    Ok(SeedLexicon {
        pairs: pairs.into_iter().map(|w| (w.to_string(), w.to_string())).collect(),
        dropped: dropped.into_iter().map(str::to_string).collect(),
    })
}

/// Orthogonal map between two spaces of equal dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentMap {
    dimension: usize,
    /// Row-major `dimension x dimension`.
    matrix: Vec<f64>,
    pub source_id: String,
    pub target_id: String,
    /// Unknown for maps read back from disk.
    pub seed_pairs: Option<usize>,
    pub normalized: bool,
    pub warnings: Vec<String>,
}

/// Solves `min ‖X W − Y‖_F` over orthogonal `W`. Returns the map and a
/// warning when `Xᵀ Y` is rank deficient (the minimizer is then not unique).
pub fn procrustes(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<(DMatrix<f64>, Option<String>)> {
    if x.shape() != y.shape() {
        return Err(Error::DimensionMismatch(x.ncols(), y.ncols()));
    }
    let m = x.transpose() * y;
    let svd = m
        .try_svd(true, true, SVD_EPS, SVD_MAX_ITER)
        .ok_or_else(|| Error::Numeric("SVD did not converge".into()))?;
    let u = svd
        .u
        .as_ref()
        .ok_or_else(|| Error::Numeric("SVD returned no U".into()))?;
    let v_t = svd
        .v_t
        .as_ref()
        .ok_or_else(|| Error::Numeric("SVD returned no Vᵀ".into()))?;
    let largest = svd.singular_values.max();
    let zero = svd
        .singular_values
        .iter()
        .filter(|&&s| s <= RANK_TOLERANCE * largest.max(1.0))
        .count();
    let warning = (zero > 0)
        .then(|| format!("cross-covariance has {zero} zero singular value(s); the orthogonal map is not unique"));
    Ok((u * v_t, warning))
}

fn unit_rows(space: &EmbeddingSpace, tokens: impl Iterator<Item = String>) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for t in tokens {
        let v = space.vector(&t).ok_or(Error::UnknownToken(t))?;
        out.extend(normalize(v).into_iter().map(f64::from));
    }
    Ok(out)
}

/// Fits `W` on unit-normalized seed vectors.
pub fn fit(src: &EmbeddingSpace, tgt: &EmbeddingSpace, lexicon: &SeedLexicon) -> Result<AlignmentMap> {
    let d = src.dimension();
    if d != tgt.dimension() {
        return Err(Error::DimensionMismatch(d, tgt.dimension()));
    }
    if lexicon.len() < MIN_SEED_PAIRS {
        return Err(Error::InsufficientAnchors { found: lexicon.len() });
    }
    let m = lexicon.len();
    let xs = unit_rows(src, lexicon.pairs.iter().map(|p| p.0.clone()))?;
    let ys = unit_rows(tgt, lexicon.pairs.iter().map(|p| p.1.clone()))?;
    let x = DMatrix::from_row_slice(m, d, &xs);
    let y = DMatrix::from_row_slice(m, d, &ys);
    let (w, warning) = procrustes(&x, &y)?;

    let map = AlignmentMap {
        dimension: d,
        matrix: w.transpose().as_slice().to_vec(),
        source_id: src.language_id.clone(),
        target_id: tgt.language_id.clone(),
        seed_pairs: Some(m),
        normalized: true,
        warnings: warning.into_iter().collect(),
    };
    let err = map.orthogonality_error();
    if !(err <= ORTHOGONALITY_TOLERANCE) {
        return Err(Error::Numeric(format!("fitted map is not orthogonal (error {err:e})")));
    }
    Ok(map)
}

impl AlignmentMap {
    pub fn from_matrix(matrix: &DMatrix<f64>, source_id: &str, target_id: &str) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch(matrix.nrows(), matrix.ncols()));
        }
        Ok(AlignmentMap {
            dimension: matrix.nrows(),
            matrix: matrix.transpose().as_slice().to_vec(),
            source_id: source_id.to_string(),
            target_id: target_id.to_string(),
            seed_pairs: None,
            normalized: true,
            warnings: Vec::new(),
        })
    }

    pub fn identity(dimension: usize, source_id: &str, target_id: &str) -> Self {
        Self::from_matrix(&DMatrix::identity(dimension, dimension), source_id, target_id).expect("identity is square")
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dimension, self.dimension, &self.matrix)
    }

    /// `max |WᵀW − I|`
    pub fn orthogonality_error(&self) -> f64 {
        let w = self.matrix();
        let g = w.transpose() * &w;
        let d = self.dimension;
        (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .map(|(i, j)| (g[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max)
    }

    /// Row vector times `W`.
    pub fn apply(&self, v: &[f32]) -> Vec<f32> {
        let d = self.dimension;
        let mut out = vec![0.0f64; d];
        for (i, &x) in v.iter().enumerate() {
            let row = &self.matrix[i * d..(i + 1) * d];
            out.iter_mut().zip(row).for_each(|(o, w)| *o += x as f64 * w);
        }
        out.into_iter().map(|x| x as f32).collect()
    }

    /// Row vector times `Wᵀ` (target space back into source space).
    pub fn apply_inverse(&self, v: &[f32]) -> Vec<f32> {
        let d = self.dimension;
        (0..d)
            .map(|i| {
                let row = &self.matrix[i * d..(i + 1) * d];
                row.iter().zip(v).map(|(w, &x)| w * x as f64).sum::<f64>() as f32
            })
            .collect()
    }

    pub fn save<W: Write>(&self, mut sink: W) -> Result<()> {
        for id in [&self.source_id, &self.target_id] {
            if id.is_empty() || id.chars().any(char::is_whitespace) {
                return Err(Error::Config(format!(
                    "language id `{id}` cannot be written to a map header"
                )));
            }
        }
        writeln!(
            sink,
            "{} {} {} {}",
            self.dimension,
            self.source_id,
            self.target_id,
            u8::from(self.normalized)
        )?;
        for row in self.matrix.chunks_exact(self.dimension) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
            writeln!(sink, "{}", line.join(" "))?;
        }
        sink.flush()?;
        Ok(())
    }

    pub fn load<R: BufRead>(source: R) -> Result<Self> {
        let mut lines = source.lines();
        let bad = |line: usize, m: &str| Error::Format {
            line,
            message: m.to_string(),
        };
        let header = lines.next().ok_or_else(|| bad(1, "empty map file"))??;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let (dimension, source_id, target_id, normalized) = match fields.as_slice() {
            [d, s, t, n] => {
                let d: usize = d.parse().map_err(|_| bad(1, "bad dimension"))?;
                let n = match *n {
                    "0" => false,
                    "1" => true,
                    _ => return Err(bad(1, "normalization flag must be 0 or 1")),
                };
                (d, s.to_string(), t.to_string(), n)
            }
            _ => return Err(bad(1, "expected `<dimension> <source_id> <target_id> <normalized>`")),
        };
        if dimension == 0 {
            return Err(bad(1, "dimension must be positive"));
        }
        let mut matrix = Vec::with_capacity(dimension * dimension);
        for i in 0..dimension {
            let line_no = i + 2;
            let line = lines
                .next()
                .ok_or_else(|| bad(line_no, "file ends before all matrix rows"))??;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|v| v.parse().map_err(|_| bad(line_no, "bad matrix entry")))
                .collect::<Result<_>>()?;
            if row.len() != dimension {
                return Err(bad(
                    line_no,
                    &format!("expected {dimension} values, found {}", row.len()),
                ));
            }
            matrix.extend(row);
        }
        Ok(AlignmentMap {
            dimension,
            matrix,
            source_id,
            target_id,
            seed_pairs: None,
            normalized,
            warnings: Vec::new(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum RetrievalMode {
    /// Plain nearest neighbor by cosine.
    #[default]
    Nn,
    /// Cross-domain similarity local scaling over `k` neighbors.
    Csls { k: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationResult {
    pub source: String,
    pub target: String,
    /// Cosine between the aligned source vector and the target vector.
    pub cosine: f32,
    /// The retrieval mode's score (equals `cosine` for nearest neighbor).
    pub score: f32,
    pub mode: RetrievalMode,
    /// The mode's score for the source token's own entry in the target
    /// vocabulary; `None` when the target vocabulary lacks it.
    pub self_score: Option<f32>,
    pub alternatives: Vec<(String, f32)>,
}

impl TranslationResult {
    pub fn is_self(&self) -> bool {
        self.source == self.target
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skipped {
    pub token: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Translations {
    pub results: Vec<TranslationResult>,
    pub skipped: Vec<Skipped>,
}

/// Retrieval state reused across queries against one target vocabulary.
pub struct Translator<'a> {
    map: &'a AlignmentMap,
    src: &'a EmbeddingSpace,
    mode: RetrievalMode,
    alternatives: usize,
    candidates: Vec<String>,
    candidate_index: HashMap<String, usize>,
    matrix: VectorMatrix,
    /// Mean similarity of each candidate to its nearest aligned source words.
    source_density: Vec<f32>,
}

impl<'a> Translator<'a> {
    pub fn new(
        map: &'a AlignmentMap,
        src: &'a EmbeddingSpace,
        tgt: &'a EmbeddingSpace,
        target_vocab: &Vocabulary,
        mode: RetrievalMode,
    ) -> Result<Self> {
        if src.dimension() != map.dimension() || tgt.dimension() != map.dimension() {
            return Err(Error::DimensionMismatch(src.dimension(), tgt.dimension()));
        }
        let mut candidates = Vec::with_capacity(target_vocab.len());
        let mut rows = Vec::with_capacity(target_vocab.len() * map.dimension());
        for t in target_vocab.tokens() {
            if let Some(v) = tgt.vector(t) {
                candidates.push(t.to_string());
                rows.extend(normalize(v));
            }
        }
        if candidates.is_empty() {
            return Err(Error::Config(
                "no target vocabulary token resolves in the target space".into(),
            ));
        }
        let matrix = VectorMatrix::from_rows(map.dimension(), rows);
        let source_density = match mode {
            RetrievalMode::Nn => Vec::new(),
            RetrievalMode::Csls { k } => {
                // cos(t, xW) = cos(t Wᵀ, x): pull candidates back into the
                // source space and scan the source vocabulary there.
                let pulled: Vec<Vec<f32>> = (0..candidates.len())
                    .map(|i| normalize(map.apply_inverse(&matrix.row(i))))
                    .collect();
                let mut density = vec![0.0; candidates.len()];
                src.unit_vectors().scan(&pulled, |i, scores| {
                    density[i] = mean_top_k(scores, k);
                });
                density
            }
        };
        let candidate_index = candidates.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Translator {
            map,
            src,
            mode,
            alternatives: DEFAULT_ALTERNATIVES,
            candidates,
            candidate_index,
            matrix,
            source_density,
        })
    }

    pub fn with_alternatives(mut self, n: usize) -> Self {
        self.alternatives = n.max(1);
        self
    }

    pub fn candidates(&self) -> &[String] {
        &self.candidates
    }

    fn aligned_query(&self, token: &str) -> Option<Vec<f32>> {
        self.src.vector(token).map(|v| normalize(self.map.apply(&normalize(v))))
    }

    fn resolve_batch(&self, sources: &[String], queries: &[Vec<f32>]) -> Vec<TranslationResult> {
        let mut out = Vec::with_capacity(queries.len());
        let keep = self.alternatives;
        self.matrix.scan(queries, |qi, cos| {
            let own = self.candidate_index.get(&sources[qi]).copied();
            let mut self_score = own.map(|i| cos[i]);
            let hits = match self.mode {
                RetrievalMode::Nn => select_top_k(cos, keep, None)
                    .into_iter()
                    .map(|(i, s)| (i, s, s))
                    .collect::<Vec<_>>(),
                RetrievalMode::Csls { k } => {
                    let query_density = mean_top_k(cos, k);
                    let adjusted: Vec<f32> = cos
                        .iter()
                        .zip(&self.source_density)
                        .map(|(&c, &r)| 2.0 * c - query_density - r)
                        .collect();
                    self_score = own.map(|i| adjusted[i]);
                    select_top_k(&adjusted, keep, None)
                        .into_iter()
                        .map(|(i, s)| (i, s, cos[i]))
                        .collect()
                }
            };
            let (best, score, cosine) = hits[0];
            out.push(TranslationResult {
                source: sources[qi].clone(),
                target: self.candidates[best].clone(),
                cosine,
                score,
                mode: self.mode,
                self_score,
                alternatives: hits.iter().map(|&(i, s, _)| (self.candidates[i].clone(), s)).collect(),
            });
        });
        out
    }

    pub fn translate(&self, token: &str) -> Result<TranslationResult> {
        let q = self
            .aligned_query(token)
            .ok_or_else(|| Error::UnknownToken(token.to_string()))?;
        Ok(self
            .resolve_batch(&[token.to_string()], &[q])
            .pop()
            .expect("one query yields one result"))
    }

    pub fn translate_all<'t>(&self, tokens: impl IntoIterator<Item = &'t str>) -> Translations {
        let mut sources = Vec::new();
        let mut queries = Vec::new();
        let mut skipped = Vec::new();
        for t in tokens {
            match self.aligned_query(t) {
                Some(q) => {
                    sources.push(t.to_string());
                    queries.push(q);
                }
                None => skipped.push(Skipped {
                    token: t.to_string(),
                    reason: format!("not in the `{}` space and no subword features", self.src.language_id),
                }),
            }
        }
        Translations {
            results: self.resolve_batch(&sources, &queries),
            skipped,
        }
    }
}

fn mean_top_k(scores: &[f32], k: usize) -> f32 {
    let top = select_top_k(scores, k, None);
    if top.is_empty() {
        0.0
    } else {
        top.iter().map(|&(_, s)| s).sum::<f32>() / top.len() as f32
    }
}

/// Translates one source token into the target vocabulary.
pub fn translate(
    map: &AlignmentMap,
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    token: &str,
    target_vocab: &Vocabulary,
    mode: RetrievalMode,
) -> Result<TranslationResult> {
    Translator::new(map, src, tgt, target_vocab, mode)?.translate(token)
}

/// Translates every source-vocabulary token; unresolvable ones are recorded
/// as skipped.
pub fn translate_all(
    map: &AlignmentMap,
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    source_vocab: &Vocabulary,
    target_vocab: &Vocabulary,
    mode: RetrievalMode,
) -> Result<Translations> {
    Ok(Translator::new(map, src, tgt, target_vocab, mode)?.translate_all(source_vocab.tokens()))
}
