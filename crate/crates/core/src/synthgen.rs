//! Synthetic corpus pairs with known answers.
//!
//! Documents come from a topic-mixture chain. Every content token has a home
//! topic, a few companion tokens that tend to follow it and a couple of
//! stopwords that may follow it, so each token ends up with its own context
//! signature while the overall frequencies stay Zipf-like. Stopwords in turn
//! lead into content tokens from every topic, which spreads the anchors over
//! the whole space. Corpus B holds the same documents as
//! corpus A in a different order, with each planted pair's occurrences
//! exchanged: `a` in B appears exactly where `b` appeared in A and the other
//! way round.

use std::collections::HashSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::{index::sample, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{is_plain_token, Corpus, CorpusProvenance};
use crate::divergence::DivergenceReport;
use crate::error::{Error, Result};
use crate::vocab::{stopwords, TRIGRAM_JOINER};

const CONSONANTS: &[u8] = b"bdfghklmnprstvz";
const VOWELS: &[u8] = b"aeiou";
const CODAS: &[u8] = b"kmnrstx";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Number of content tokens (planted ones included).
    pub vocab_size: usize,
    pub topics: usize,
    /// Documents per corpus.
    pub documents: usize,
    pub doc_len_min: usize,
    pub doc_len_max: usize,
    pub zipf_exponent: f64,
    /// Probability that a token is a stopword.
    pub stopword_rate: f64,
    /// Probability that a content token follows the previous token's
    /// companions rather than a fresh topic draw.
    pub follow_prob: f64,
    pub companions: usize,
    /// Stopwords that may follow each content token.
    pub stopword_links: usize,
    /// Content tokens that may follow each stopword, drawn across topics.
    pub stopword_companions: usize,
    /// Named planted pairs; a name with spaces is emitted as several words.
    pub planted: Vec<(String, String)>,
    /// Additional pairs drawn from the generated tokens.
    pub random_pairs: usize,
    /// Planted tokens come from this slice of the frequency ranking,
    /// as fractions of `vocab_size`.
    pub planted_ranks: (f64, f64),
    pub ids: (String, String),
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            vocab_size: 2_000,
            topics: 20,
            documents: 10_000,
            doc_len_min: 5,
            doc_len_max: 30,
            zipf_exponent: 1.0,
            stopword_rate: 0.25,
            follow_prob: 0.7,
            companions: 3,
            stopword_links: 2,
            stopword_companions: 8,
            planted: Vec::new(),
            random_pairs: 0,
            planted_ranks: (0.2, 0.5),
            ids: ("a".into(), "b".into()),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn pair_count(&self) -> usize {
        self.planted.len() + self.random_pairs
    }

    /// Sets `documents` so each corpus holds roughly `tokens` tokens.
    pub fn with_token_budget(mut self, tokens: usize) -> Self {
        let mean = self.mean_doc_len();
        self.documents = ((tokens as f64 / mean).round() as usize).max(1);
        self
    }

    /// Expected emitted words per document, counting phrase words once each.
    pub fn mean_doc_len(&self) -> f64 {
        (self.doc_len_min + self.doc_len_max) as f64 / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.topics == 0 || self.topics > self.vocab_size {
            return fail(format!("topic count must be in 1..={}", self.vocab_size));
        }
        if self.documents == 0 {
            return fail("document count must be positive".into());
        }
        if self.doc_len_min == 0 || self.doc_len_min > self.doc_len_max {
            return fail("document lengths must satisfy 1 <= min <= max".into());
        }
        if !(0.0..1.0).contains(&self.stopword_rate) || !(0.0..1.0).contains(&self.follow_prob) {
            return fail("stopword rate and follow probability must lie in [0, 1)".into());
        }
        if self.companions == 0 || self.stopword_links == 0 || self.stopword_companions == 0 {
            return fail("companion and stopword link counts must be positive".into());
        }
        if !(self.zipf_exponent >= 0.0) {
            return fail("Zipf exponent must be non-negative".into());
        }
        let pairs = self.pair_count();
        if self.vocab_size < 10 * pairs {
            return fail(format!(
                "vocabulary of {} is too small for {pairs} planted pairs (need 10x)",
                self.vocab_size
            ));
        }
        let (lo, hi) = self.planted_ranks;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return fail("planted rank range must satisfy 0 <= lo < hi <= 1".into());
        }
        if rank_slots(self).len() < 2 * pairs {
            return fail("planted rank range holds too few tokens for the planted pairs".into());
        }
        if self.ids.0 == self.ids.1 {
            return fail("the two corpora need distinct ids".into());
        }
        let stop = stopwords();
        let mut seen = HashSet::new();
        for name in self.planted.iter().flat_map(|(a, b)| [a, b]) {
            let words: Vec<&str> = name.split(' ').collect();
            if words.iter().any(|w| !is_plain_token(w)) {
                return fail(format!("planted token `{name}` must be lowercase [a-z0-9] words"));
            }
            if words.len() == 1 && stop.contains(name) {
                return fail(format!("planted token `{name}` collides with a stopword"));
            }
            if !seen.insert(name.as_str()) {
                return fail(format!("planted token `{name}` appears twice"));
            }
        }
        Ok(())
    }
}

fn rank_slots(config: &SynthConfig) -> std::ops::Range<usize> {
    let v = config.vocab_size as f64;
    let lo = (config.planted_ranks.0 * v).floor() as usize;
    let hi = ((config.planted_ranks.1 * v).ceil() as usize).min(config.vocab_size);
    lo..hi.max(lo)
}

/// Token form of a planted name: phrase words joined as a merged trigram.
pub fn token_form(name: &str) -> String {
    name.replace(' ', &TRIGRAM_JOINER.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub corpus_a: String,
    pub corpus_b: String,
    /// Planted pairs by name, as configured or drawn.
    pub planted: Vec<(String, String)>,
    pub seed: u64,
    pub vocab_size: usize,
}

impl GroundTruth {
    pub fn planted_tokens(&self) -> Vec<(String, String)> {
        self.planted
            .iter()
            .map(|(a, b)| (token_form(a), token_form(b)))
            .collect()
    }

    /// The token `token` should translate to; itself unless planted.
    pub fn expected(&self, token: &str) -> String {
        for (a, b) in self.planted_tokens() {
            if a == token {
                return b;
            }
            if b == token {
                return a;
            }
        }
        token.to_string()
    }

    pub fn is_planted(&self, token: &str) -> bool {
        self.planted_tokens().iter().any(|(a, b)| a == token || b == token)
    }
}

fn pronounceable(rng: &mut ChaCha8Rng) -> String {
    let syllables = rng.gen_range(2..=3);
    let mut s = String::new();
    for _ in 0..syllables {
        s.push(*CONSONANTS.choose(rng).unwrap() as char);
        s.push(*VOWELS.choose(rng).unwrap() as char);
    }
    if rng.gen_bool(0.5) {
        s.push(*CODAS.choose(rng).unwrap() as char);
    }
    s
}

#[derive(Clone, Copy)]
enum Slot {
    Content(usize),
    Stop(usize),
}

struct Model {
    words: Vec<Vec<String>>,
    stop: Vec<String>,
    topic_members: Vec<Vec<usize>>,
    topic_draw: Vec<WeightedIndex<f64>>,
    stop_draw: WeightedIndex<f64>,
    companions: Vec<Vec<usize>>,
    partner_stop: Vec<Vec<usize>>,
    stop_companions: Vec<Vec<usize>>,
}

fn zipf(n: usize, s: f64) -> Vec<f64> {
    (0..n).map(|i| 1.0 / ((i + 1) as f64).powf(s)).collect()
}

fn build_model(config: &SynthConfig, rng: &mut ChaCha8Rng) -> (Model, Vec<(usize, usize)>, Vec<(String, String)>) {
    let stop_set = stopwords();
    let reserved: HashSet<&str> = config
        .planted
        .iter()
        .flat_map(|(a, b)| [a.as_str(), b.as_str()])
        .flat_map(|n| n.split(' '))
        .collect();
    let mut names = Vec::with_capacity(config.vocab_size);
    let mut seen = HashSet::new();
    while names.len() < config.vocab_size {
        let w = pronounceable(rng);
        if stop_set.contains(&w) || reserved.contains(w.as_str()) || !seen.insert(w.clone()) {
            continue;
        }
        names.push(w);
    }

    let range = rank_slots(config);
    let mut picked: Vec<usize> = sample(rng, range.len(), 2 * config.pair_count())
        .into_iter()
        .map(|i| range.start + i)
        .collect();
    picked.sort_unstable();
    let mut slot_pairs: Vec<(usize, usize)> = picked.chunks_exact(2).map(|c| (c[0], c[1])).collect();
    slot_pairs.shuffle(rng);
    let mut planted = Vec::with_capacity(slot_pairs.len());
    for (k, &(i, j)) in slot_pairs.iter().enumerate() {
        if let Some((a, b)) = config.planted.get(k) {
            names[i] = a.clone();
            names[j] = b.clone();
        }
        planted.push((names[i].clone(), names[j].clone()));
    }

    let weights = zipf(config.vocab_size, config.zipf_exponent);
    let mut topic_members = vec![Vec::new(); config.topics];
    for i in 0..config.vocab_size {
        topic_members[i % config.topics].push(i);
    }
    let topic_draw = topic_members
        .iter()
        .map(|m| WeightedIndex::new(m.iter().map(|&i| weights[i])).expect("non-empty topic"))
        .collect();
    let companions = (0..config.vocab_size)
        .map(|i| {
            let members = &topic_members[i % config.topics];
            (0..config.companions).map(|_| *members.choose(rng).unwrap()).collect()
        })
        .collect();
    // Contractions never survive preprocessing, so they are not emitted.
    let stop: Vec<String> = stop_set
        .iter()
        .filter(|w| is_plain_token(w))
        .map(str::to_string)
        .collect();
    let stop_draw = WeightedIndex::new(zipf(stop.len(), 1.0)).unwrap();
    let partner_stop = (0..config.vocab_size)
        .map(|_| {
            (0..config.stopword_links)
                .map(|_| rng.gen_range(0..stop.len()))
                .collect()
        })
        .collect();
    let stop_companions = (0..stop.len())
        .map(|_| {
            (0..config.stopword_companions)
                .map(|_| rng.gen_range(0..config.vocab_size))
                .collect()
        })
        .collect();
    let words = names
        .iter()
        .map(|n| n.split(' ').map(str::to_string).collect())
        .collect();
    (
        Model {
            words,
            stop,
            topic_members,
            topic_draw,
            stop_draw,
            companions,
            partner_stop,
            stop_companions,
        },
        slot_pairs,
        planted,
    )
}

impl Model {
    fn document(&self, config: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<Slot> {
        let len = rng.gen_range(config.doc_len_min..=config.doc_len_max);
        let topic = rng.gen_range(0..config.topics);
        let mut doc = Vec::with_capacity(len);
        let mut prev: Option<Slot> = None;
        let mut words = 0;
        while words < len {
            let next = if rng.gen_bool(config.stopword_rate) {
                match prev {
                    Some(Slot::Content(i)) => Slot::Stop(*self.partner_stop[i].choose(rng).unwrap()),
                    _ => Slot::Stop(self.stop_draw.sample(rng)),
                }
            } else {
                match prev {
                    Some(Slot::Content(i)) if rng.gen_bool(config.follow_prob) => {
                        Slot::Content(*self.companions[i].choose(rng).unwrap())
                    }
                    Some(Slot::Stop(s)) if rng.gen_bool(config.follow_prob) => {
                        Slot::Content(*self.stop_companions[s].choose(rng).unwrap())
                    }
                    _ => Slot::Content(self.topic_members[topic][self.topic_draw[topic].sample(rng)]),
                }
            };
            words += match next {
                Slot::Content(i) => self.words[i].len(),
                Slot::Stop(_) => 1,
            };
            doc.push(next);
            prev = Some(next);
        }
        doc
    }

    fn emit(&self, doc: &[Slot], swap: &[usize]) -> Vec<String> {
        let mut out = Vec::with_capacity(doc.len() + 2);
        for s in doc {
            match *s {
                Slot::Content(i) => out.extend(self.words[swap[i]].iter().cloned()),
                Slot::Stop(k) => out.push(self.stop[k].clone()),
            }
        }
        out
    }
}

/// Generates the corpus pair and its ground truth. Deterministic in the
/// config (seed included).
pub fn generate(config: &SynthConfig) -> Result<(Corpus, Corpus, GroundTruth)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (model, slot_pairs, planted) = build_model(config, &mut rng);

    let mut doc_rng = ChaCha8Rng::seed_from_u64(config.seed);
    doc_rng.set_stream(1);
    let docs: Vec<Vec<Slot>> = (0..config.documents)
        .map(|_| model.document(config, &mut doc_rng))
        .collect();

    let identity: Vec<usize> = (0..config.vocab_size).collect();
    let mut swap = identity.clone();
    for &(i, j) in &slot_pairs {
        swap[i] = j;
        swap[j] = i;
    }
    let mut order: Vec<usize> = (0..docs.len()).collect();
    let mut order_rng = ChaCha8Rng::seed_from_u64(config.seed);
    order_rng.set_stream(2);
    order.shuffle(&mut order_rng);

    let provenance = |id: &str| CorpusProvenance {
        origin: Some(format!("synthetic seed={} corpus={id}", config.seed)),
        ..CorpusProvenance::default()
    };
    let a = Corpus::new(
        config.ids.0.clone(),
        docs.iter().map(|d| model.emit(d, &identity)).collect(),
    )
    .with_provenance(provenance(&config.ids.0));
    let b = Corpus::new(
        config.ids.1.clone(),
        order.iter().map(|&k| model.emit(&docs[k], &swap)).collect(),
    )
    .with_provenance(provenance(&config.ids.1));
    let truth = GroundTruth {
        corpus_a: config.ids.0.clone(),
        corpus_b: config.ids.1.clone(),
        planted,
        seed: config.seed,
        vocab_size: config.vocab_size,
    };
    Ok((a, b, truth))
}

/// Randomly splits the documents of `corpus` into two halves of equal
/// document count (the first gets the extra one), keeping document order
/// within each half.
pub fn split_halves(corpus: &Corpus, ids: (&str, &str), seed: u64) -> (Corpus, Corpus) {
    let n = corpus.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut first = vec![false; n];
    for i in sample(&mut rng, n, n.div_ceil(2)) {
        first[i] = true;
    }
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (d, &f) in corpus.documents().iter().zip(&first) {
        if f {
            x.push(d.clone());
        } else {
            y.push(d.clone());
        }
    }
    (
        Corpus::new(ids.0, x).with_provenance(corpus.provenance.clone()),
        Corpus::new(ids.1, y).with_provenance(corpus.provenance.clone()),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    /// Planted pairs whose two tokens both translate to their partner.
    pub recall: f64,
    /// Among planted tokens reported misaligned, the share paired with the
    /// right partner.
    pub partner_precision: f64,
    /// Misaligned share among the most frequent non-planted source tokens.
    pub false_rate: f64,
    pub false_slice: usize,
}

pub const FALSE_RATE_SLICE: usize = 500;

/// Scores a divergence report against the planted truth. Vacuous ratios
/// (nothing planted, nothing reported) count as 1 for recall and precision
/// and 0 for the false rate.
pub fn evaluate_recovery(report: &DivergenceReport, truth: &GroundTruth) -> Result<Recovery> {
    let ids = [report.source_id.as_str(), report.target_id.as_str()];
    let expected = [truth.corpus_a.as_str(), truth.corpus_b.as_str()];
    if !(ids == expected || ids == [expected[1], expected[0]]) {
        return Err(Error::Consistency(format!(
            "report covers {} -> {} but the ground truth describes {} and {}",
            ids[0], ids[1], expected[0], expected[1]
        )));
    }
    let pairs = truth.planted_tokens();
    let target_of = |t: &str| {
        report
            .misaligned
            .iter()
            .find(|p| p.source == t)
            .map(|p| p.target.as_str())
    };
    let recovered = pairs
        .iter()
        .filter(|(a, b)| target_of(a) == Some(b.as_str()) && target_of(b) == Some(a.as_str()))
        .count();
    let recall = if pairs.is_empty() {
        1.0
    } else {
        recovered as f64 / pairs.len() as f64
    };

    let (mut flagged, mut right) = (0, 0);
    for (a, b) in &pairs {
        for (x, y) in [(a, b), (b, a)] {
            if let Some(t) = target_of(x) {
                flagged += 1;
                right += usize::from(t == y);
            }
        }
    }
    let partner_precision = if flagged == 0 {
        1.0
    } else {
        right as f64 / flagged as f64
    };

    let slice: Vec<&String> = report
        .evaluated_tokens
        .iter()
        .filter(|t| !truth.is_planted(t))
        .take(FALSE_RATE_SLICE)
        .collect();
    let false_hits = slice.iter().filter(|t| report.is_misaligned(t)).count();
    let false_rate = if slice.is_empty() {
        0.0
    } else {
        false_hits as f64 / slice.len() as f64
    };
    Ok(Recovery {
        recall,
        partner_precision,
        false_rate,
        false_slice: slice.len(),
    })
}
