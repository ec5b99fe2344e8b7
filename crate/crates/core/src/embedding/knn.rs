//! Brute-force cosine nearest neighbors over unit-normalized vectors.

use std::cmp::Ordering;

use nalgebra::DMatrix;

/// Scores per gemm call are capped at this many cells.
const MAX_SCORE_CELLS: usize = 1 << 24;

pub fn cosine(a: &[f32], b: &[f32]) -> f32 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        dot += x as f64 * y as f64;
        na += x as f64 * x as f64;
        nb += y as f64 * y as f64;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0) as f32
}

/// Scales `v` to unit length; zero vectors stay zero.
pub fn normalize(mut v: Vec<f32>) -> Vec<f32> {
    let norm = v.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    if norm > 0.0 {
        let inv = (1.0 / norm) as f32;
        v.iter_mut().for_each(|x| *x *= inv);
    }
    v
}

/// Row vectors held as an `n x dim` matrix, ready for batched scoring.
#[derive(Debug, Clone)]
pub struct VectorMatrix {
    dim: usize,
    rows: DMatrix<f32>,
}

impl VectorMatrix {
    /// `data` is row-major `n x dim`; rows are normalized on the way in.
    pub fn normalized(dim: usize, mut data: Vec<f32>) -> Self {
        for row in data.chunks_exact_mut(dim) {
            let n = normalize(row.to_vec());
            row.copy_from_slice(&n);
        }
        Self::from_rows(dim, data)
    }

    pub fn from_rows(dim: usize, data: Vec<f32>) -> Self {
        let n = data.len() / dim;
        VectorMatrix {
            dim,
            rows: DMatrix::from_row_slice(n, dim, &data),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> Vec<f32> {
        self.rows.row(i).iter().copied().collect()
    }

    /// Calls `visit(query_index, scores)` with the dot products of each query
    /// against every row.
    pub fn scan<F: FnMut(usize, &[f32])>(&self, queries: &[Vec<f32>], mut visit: F) {
        let n = self.len().max(1);
        let chunk = (MAX_SCORE_CELLS / n).clamp(1, 1024);
        for (c, block) in queries.chunks(chunk).enumerate() {
            let mut flat = Vec::with_capacity(block.len() * self.dim);
            for q in block {
                assert_eq!(q.len(), self.dim, "query dimension mismatch");
                flat.extend_from_slice(q);
            }
            let qm = DMatrix::from_column_slice(self.dim, block.len(), &flat);
            let scores = &self.rows * qm;
            for j in 0..block.len() {
                visit(c * chunk + j, scores.column(j).as_slice());
            }
        }
    }
}

fn rank_order(a: &(usize, f32), b: &(usize, f32)) -> Ordering {
    b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0))
}

/// Indices of the `k` best rows in `scores`, best first; ties favor the lower
/// index. `skip` removes one row from consideration.
pub fn select_top_k(scores: &[f32], k: usize, skip: Option<usize>) -> Vec<(usize, f32)> {
    let mut cand: Vec<(usize, f32)> = scores
        .iter()
        .copied()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip)
        .collect();
    if k == 0 || cand.is_empty() {
        return Vec::new();
    }
    if cand.len() > k {
        cand.select_nth_unstable_by(k - 1, rank_order);
        cand.truncate(k);
    }
    cand.sort_by(rank_order);
    cand
}

/// Top-`k` rows of `base` by cosine for each (already normalized) query.
/// `exclude(q, row)` drops rows per query.
pub fn top_k_cosine<F>(base: &VectorMatrix, queries: &[Vec<f32>], k: usize, exclude: F) -> Vec<Vec<(usize, f32)>>
where
    F: Fn(usize, usize) -> bool,
{
    let mut out = vec![Vec::new(); queries.len()];
    base.scan(queries, |qi, scores| {
        // At most one excluded row is expected per query in practice, but the
        // predicate is general.
        let skip: Vec<usize> = (0..scores.len()).filter(|&b| exclude(qi, b)).collect();
        out[qi] = if skip.len() <= 1 {
            select_top_k(scores, k, skip.first().copied())
        } else {
            let mut masked = scores.to_vec();
            for &s in &skip {
                masked[s] = f32::NEG_INFINITY;
            }
            let mut hits = select_top_k(&masked, k, None);
            hits.retain(|(i, _)| !skip.contains(i));
            hits
        };
    });
    out
}
