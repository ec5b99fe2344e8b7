//! SGNS training loop.
//!
//! Deterministic mode runs one worker over the documents in corpus order.
//! Fast mode shards documents across workers that update the shared
//! parameter tables without synchronization; individual float updates may be
//! lost, which only perturbs the stochastic optimization.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};
use std::sync::Mutex;

use rand::distributions::Uniform;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::subword::ngram_buckets;
use super::{EmbeddingSpace, SpaceProvenance, SubwordConfig, SubwordTable, TrainConfig};
use crate::corpus::Corpus;
use crate::error::{Error, Result};

const NEGATIVE_TABLE_SIZE: usize = 10_000_000;
const NEGATIVE_POWER: f64 = 0.75;

/// Row-addressed parameter storage.
trait Params {
    fn dot(&self, row: usize, v: &[f32]) -> f32;
    /// `out += scale * self[row]`
    fn add_to(&self, row: usize, scale: f32, out: &mut [f32]);
    /// `self[row] += scale * v`
    fn axpy(&mut self, row: usize, scale: f32, v: &[f32]);
}

struct Dense<'a> {
    data: &'a mut [f32],
    dim: usize,
}

impl Params for Dense<'_> {
    #[inline(always)]
    fn dot(&self, row: usize, v: &[f32]) -> f32 {
        dot8(&self.data[row * self.dim..(row + 1) * self.dim], v)
    }

    #[inline(always)]
    fn add_to(&self, row: usize, scale: f32, out: &mut [f32]) {
        let r = &self.data[row * self.dim..(row + 1) * self.dim];
        out.iter_mut().zip(r).for_each(|(o, x)| *o += scale * x);
    }

    #[inline(always)]
    fn axpy(&mut self, row: usize, scale: f32, v: &[f32]) {
        let r = &mut self.data[row * self.dim..(row + 1) * self.dim];
        r.iter_mut().zip(v).for_each(|(x, y)| *x += scale * y);
    }
}

/// Shared view for lock-free concurrent updates.
#[derive(Clone, Copy)]
struct Racy<'a> {
    data: &'a [AtomicU32],
    dim: usize,
}

impl<'a> Racy<'a> {
    fn new(data: &'a mut [f32], dim: usize) -> Self {
        // SAFETY: f32 and AtomicU32 have identical size and alignment, and the
        // exclusive borrow guarantees no non-atomic access while this view
        // lives.
        let data = unsafe { std::slice::from_raw_parts(data.as_mut_ptr() as *const AtomicU32, data.len()) };
        Racy { data, dim }
    }

    #[inline]
    fn get(&self, i: usize) -> f32 {
        f32::from_bits(self.data[i].load(Ordering::Relaxed))
    }
}

impl Params for Racy<'_> {
    fn dot(&self, row: usize, v: &[f32]) -> f32 {
        let base = row * self.dim;
        v.iter().enumerate().map(|(j, y)| self.get(base + j) * y).sum()
    }

    fn add_to(&self, row: usize, scale: f32, out: &mut [f32]) {
        let base = row * self.dim;
        out.iter_mut()
            .enumerate()
            .for_each(|(j, o)| *o += scale * self.get(base + j));
    }

    fn axpy(&mut self, row: usize, scale: f32, v: &[f32]) {
        let base = row * self.dim;
        for (j, y) in v.iter().enumerate() {
            let x = self.get(base + j) + scale * y;
            self.data[base + j].store(x.to_bits(), Ordering::Relaxed);
        }
    }
}

#[inline(always)]
fn dot8(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f32 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    acc.iter().sum::<f32>() + tail
}

const SIGMOID_TABLE_SIZE: usize = 512;
const MAX_SIGMOID: f32 = 8.0;
const LOG_TABLE_SIZE: usize = 512;

/// Tabulated logistic and logarithm for the inner loop.
struct Tables {
    sigmoid: Vec<f32>,
    log: Vec<f32>,
}

impl Tables {
    fn new() -> Self {
        let sigmoid = (0..=SIGMOID_TABLE_SIZE)
            .map(|i| {
                let x = (i as f32 * 2.0 * MAX_SIGMOID) / SIGMOID_TABLE_SIZE as f32 - MAX_SIGMOID;
                1.0 / (1.0 + (-x).exp())
            })
            .collect();
        let log = (0..=LOG_TABLE_SIZE)
            .map(|i| ((i as f32 + 1e-5) / LOG_TABLE_SIZE as f32).ln())
            .collect();
        Tables { sigmoid, log }
    }

    #[inline]
    fn sigmoid(&self, x: f32) -> f32 {
        if x < -MAX_SIGMOID {
            0.0
        } else if x > MAX_SIGMOID {
            1.0
        } else {
            let i = ((x + MAX_SIGMOID) * SIGMOID_TABLE_SIZE as f32 / MAX_SIGMOID / 2.0) as usize;
            self.sigmoid[i]
        }
    }

    #[inline]
    fn log(&self, x: f32) -> f32 {
        if x > 1.0 {
            0.0
        } else {
            self.log[(x * LOG_TABLE_SIZE as f32) as usize]
        }
    }
}

/// Read-only training inputs shared by all workers.
struct Plan<'a> {
    docs: &'a [Vec<u32>],
    rows: &'a [Vec<u32>],
    keep_prob: &'a [f32],
    negatives: &'a [u32],
    tables: &'a Tables,
    config: &'a TrainConfig,
    total_tokens: u64,
}

struct Worker {
    rng: ChaCha8Rng,
    hidden: Vec<f32>,
    grad: Vec<f32>,
    line: Vec<u32>,
    /// Cursor into the shuffled negative table.
    neg_pos: usize,
    /// Per-epoch (loss sum, event count).
    losses: Vec<(f64, u64)>,
}

impl Worker {
    fn new(dim: usize, epochs: usize, rng: ChaCha8Rng, neg_pos: usize) -> Self {
        Worker {
            rng,
            neg_pos,
            hidden: vec![0.0; dim],
            grad: vec![0.0; dim],
            line: Vec::new(),
            losses: vec![(0.0, 0); epochs],
        }
    }

    #[inline(always)]
    fn sample_negative(&mut self, plan: &Plan, target: u32) -> u32 {
        let n = plan.negatives.len();
        loop {
            let c = plan.negatives[self.neg_pos];
            self.neg_pos += 1;
            if self.neg_pos == n {
                self.neg_pos = 0;
            }
            if c != target {
                return c;
            }
        }
    }

    /// One pass over a document; returns the number of raw tokens consumed.
    #[inline(always)]
    fn train_doc<I: Params, O: Params>(
        &mut self,
        plan: &Plan,
        doc: &[u32],
        epoch: usize,
        lr: f32,
        input: &mut I,
        output: &mut O,
    ) -> u64 {
        let cfg = plan.config;
        let mut line = std::mem::take(&mut self.line);
        line.clear();
        for &w in doc {
            let p = plan.keep_prob[w as usize];
            if p >= 1.0 || self.rng.gen::<f32>() < p {
                line.push(w);
            }
        }
        let (mut loss, mut events) = (0.0f64, 0u64);
        for pos in 0..line.len() {
            let span = self.rng.gen_range(1..=cfg.window);
            let lo = pos.saturating_sub(span);
            let hi = (pos + span).min(line.len() - 1);
            if lo == hi {
                continue;
            }
            let rows = &plan.rows[line[pos] as usize];
            self.hidden.iter_mut().for_each(|h| *h = 0.0);
            for &r in rows {
                input.add_to(r as usize, 1.0, &mut self.hidden);
            }
            let inv = 1.0 / rows.len() as f32;
            self.hidden.iter_mut().for_each(|h| *h *= inv);
            self.grad.iter_mut().for_each(|g| *g = 0.0);

            for ctx in lo..=hi {
                if ctx == pos {
                    continue;
                }
                let target = line[ctx];
                let mut l = self.logistic(plan.tables, output, target, true, lr);
                for _ in 0..cfg.negatives {
                    let neg = self.sample_negative(plan, target);
                    l += self.logistic(plan.tables, output, neg, false, lr);
                }
                loss += l as f64;
                events += 1;
            }
            for &r in rows {
                input.axpy(r as usize, 1.0, &self.grad);
            }
        }
        self.losses[epoch].0 += loss;
        self.losses[epoch].1 += events;
        self.line = line;
        doc.len() as u64
    }

    #[inline(always)]
    fn logistic<O: Params>(&mut self, tables: &Tables, output: &mut O, target: u32, positive: bool, lr: f32) -> f32 {
        let t = target as usize;
        let p = tables.sigmoid(output.dot(t, &self.hidden));
        let label = if positive { 1.0 } else { 0.0 };
        let alpha = lr * (label - p);
        output.add_to(t, alpha, &mut self.grad);
        output.axpy(t, alpha, &self.hidden);
        if positive {
            -tables.log(p)
        } else {
            -tables.log(1.0 - p)
        }
    }
}

fn learning_rate(cfg: &TrainConfig, processed: u64, total: u64) -> f32 {
    let progress = (processed as f64 / total.max(1) as f64).min(1.0);
    (cfg.learning_rate as f64 * (1.0 - progress)) as f32
}

fn negative_table(counts: &[u64]) -> Vec<u32> {
    let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(NEGATIVE_POWER)).collect();
    let z: f64 = weights.iter().sum();
    let mut table = Vec::with_capacity(NEGATIVE_TABLE_SIZE);
    for (i, w) in weights.iter().enumerate() {
        let slots = ((w / z) * NEGATIVE_TABLE_SIZE as f64).ceil() as usize;
        table.extend(std::iter::repeat_n(i as u32, slots.max(1)));
    }
    table
}

/// Trains skip-gram embeddings with negative sampling on `corpus`.
pub fn train(corpus: &Corpus, config: &TrainConfig) -> Result<EmbeddingSpace> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus(corpus.language_id.clone()));
    }
    let dim = config.dimension;

    let mut freq: HashMap<&str, u64> = HashMap::new();
    for t in corpus.tokens() {
        *freq.entry(t).or_default() += 1;
    }
    let mut vocab: Vec<(&str, u64)> = freq
        .into_iter()
        .filter(|&(_, c)| c >= config.min_count as u64)
        .collect();
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary {
            min_count: config.min_count,
        });
    }
    vocab.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let nwords = vocab.len();
    let index: HashMap<&str, u32> = vocab.iter().enumerate().map(|(i, (t, _))| (*t, i as u32)).collect();
    let counts: Vec<u64> = vocab.iter().map(|v| v.1).collect();

    let docs: Vec<Vec<u32>> = corpus
        .documents()
        .iter()
        .map(|d| {
            d.iter()
                .filter_map(|t| index.get(t.as_str()).copied())
                .collect::<Vec<u32>>()
        })
        .filter(|d| !d.is_empty())
        .collect();
    let in_vocab_tokens: u64 = counts.iter().sum();

    let bucket_count = match config.subword {
        SubwordConfig::On { buckets, .. } => buckets,
        SubwordConfig::Off => 0,
    };
    let rows: Vec<Vec<u32>> = vocab
        .iter()
        .enumerate()
        .map(|(i, (t, _))| {
            let mut r = vec![i as u32];
            if let SubwordConfig::On { min_n, max_n, buckets } = config.subword {
                r.extend(
                    ngram_buckets(t, min_n, max_n, buckets)
                        .into_iter()
                        .map(|b| b + nwords as u32),
                );
            }
            r
        })
        .collect();

    let keep_prob: Vec<f32> = counts
        .iter()
        .map(|&c| {
            if config.sample <= 0.0 {
                return 1.0;
            }
            let f = c as f64 / in_vocab_tokens as f64;
            let r = config.sample / f;
            (r.sqrt() + r) as f32
        })
        .collect();
    let mut negatives = negative_table(&counts);
    let tables = Tables::new();

    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    init_rng.set_stream(u64::MAX);
    let bound = 0.5 / dim as f32;
    let dist = Uniform::new_inclusive(-bound, bound);
    let mut input: Vec<f32> = (0..(nwords + bucket_count) * dim)
        .map(|_| init_rng.sample(dist))
        .collect();
    let mut output = vec![0.0f32; nwords * dim];
    // Workers walk the shuffled table sequentially.
    negatives.shuffle(&mut init_rng);
    if nwords == 1 {
        return Err(Error::Config("training needs at least two distinct tokens".into()));
    }

    let plan = Plan {
        docs: &docs,
        rows: &rows,
        keep_prob: &keep_prob,
        negatives: &negatives,
        tables: &tables,
        config,
        total_tokens: in_vocab_tokens * config.epochs as u64,
    };

    let workers = if config.deterministic { 1 } else { config.threads.max(1) };
    let losses = if workers == 1 {
        let mut w = Worker::new(dim, config.epochs, worker_rng(config.seed, 0), 0);
        let mut inp = Dense { data: &mut input, dim };
        let mut out = Dense { data: &mut output, dim };
        run_serial(&mut w, &plan, &mut inp, &mut out);
        w.losses
    } else {
        train_concurrent(&plan, workers, &mut input, &mut output)
    };

    let mut vectors = vec![0.0f32; nwords * dim];
    for (i, r) in rows.iter().enumerate() {
        let dst = &mut vectors[i * dim..(i + 1) * dim];
        for &row in r {
            let src = &input[row as usize * dim..(row as usize + 1) * dim];
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
        }
        let inv = 1.0 / r.len() as f32;
        dst.iter_mut().for_each(|d| *d *= inv);
    }
    let subword = match config.subword {
        SubwordConfig::On { min_n, max_n, buckets } => Some(SubwordTable {
            min_n,
            max_n,
            buckets,
            vectors: input.split_off(nwords * dim),
        }),
        SubwordConfig::Off => None,
    };

    let provenance = SpaceProvenance {
        config: Some(config.clone()),
        corpus_tokens: corpus.token_count(),
        epoch_losses: losses
            .iter()
            .map(|&(l, n)| if n == 0 { 0.0 } else { l / n as f64 })
            .collect(),
    };
    Ok(EmbeddingSpace::assemble(
        corpus.language_id.clone(),
        dim,
        vocab.iter().map(|(t, _)| t.to_string()).collect(),
        counts,
        vectors,
        subword,
        provenance,
    ))
}

fn run_serial_generic(w: &mut Worker, plan: &Plan, inp: &mut Dense, out: &mut Dense) {
    let mut processed = 0u64;
    for epoch in 0..plan.config.epochs {
        for doc in plan.docs {
            let lr = learning_rate(plan.config, processed, plan.total_tokens);
            processed += w.train_doc(plan, doc, epoch, lr, inp, out);
        }
    }
}

/// Same loop compiled with AVX2/FMA enabled.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn run_serial_avx2(w: &mut Worker, plan: &Plan, inp: &mut Dense, out: &mut Dense) {
    let mut processed = 0u64;
    for epoch in 0..plan.config.epochs {
        for doc in plan.docs {
            let lr = learning_rate(plan.config, processed, plan.total_tokens);
            processed += w.train_doc(plan, doc, epoch, lr, inp, out);
        }
    }
}

fn run_serial(w: &mut Worker, plan: &Plan, inp: &mut Dense, out: &mut Dense) {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma") {
        // SAFETY: the required CPU features were detected at runtime.
        unsafe { run_serial_avx2(w, plan, inp, out) };
        return;
    }
    run_serial_generic(w, plan, inp, out)
}

fn worker_rng(seed: u64, worker: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(worker);
    rng
}

fn train_concurrent(plan: &Plan, workers: usize, input: &mut [f32], output: &mut [f32]) -> Vec<(f64, u64)> {
    let cfg = plan.config;
    let dim = cfg.dimension;
    let inp = Racy::new(input, dim);
    let out = Racy::new(output, dim);
    let processed = AtomicU64::new(0);
    let merged = Mutex::new(vec![(0.0f64, 0u64); cfg.epochs]);

    std::thread::scope(|scope| {
        for id in 0..workers {
            let (mut inp, mut out) = (inp, out);
            let processed = &processed;
            let merged = &merged;
            scope.spawn(move || {
                let mut w = Worker::new(
                    dim,
                    cfg.epochs,
                    worker_rng(cfg.seed, id as u64),
                    id * plan.negatives.len() / workers,
                );
                for epoch in 0..cfg.epochs {
                    for doc in plan.docs.iter().skip(id).step_by(workers) {
                        let lr = learning_rate(cfg, processed.load(Ordering::Relaxed), plan.total_tokens);
                        let n = w.train_doc(plan, doc, epoch, lr, &mut inp, &mut out);
                        processed.fetch_add(n, Ordering::Relaxed);
                    }
                }
                let mut m = merged.lock().expect("loss accumulator poisoned");
                for (acc, l) in m.iter_mut().zip(&w.losses) {
                    acc.0 += l.0;
                    acc.1 += l.1;
                }
            });
        }
    });
    merged.into_inner().expect("loss accumulator poisoned")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot8_matches_naive() {
        let a: Vec<f32> = (0..19).map(|i| i as f32 * 0.5).collect();
        let b: Vec<f32> = (0..19).map(|i| 1.0 - i as f32 * 0.1).collect();
        let naive: f32 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot8(&a, &b) - naive).abs() < 1e-4);
    }

    #[test]
    fn negative_table_follows_smoothed_unigram() {
        let t = negative_table(&[16, 1]);
        let zeros = t.iter().filter(|&&i| i == 0).count() as f64;
        // 16^0.75 = 8, so word 0 should take 8/9 of the slots.
        assert!((zeros / t.len() as f64 - 8.0 / 9.0).abs() < 1e-3);
    }
}
