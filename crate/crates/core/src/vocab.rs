//! Source/target vocabularies, trigram vocabularies and the stopword asset.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

pub const DEFAULT_SOURCE_SIZE: usize = 5_000;
pub const DEFAULT_TARGET_SIZE: usize = 10_000;

/// Joins the words of a merged trigram into one token.
pub const TRIGRAM_JOINER: char = '_';

const STOPWORDS_EN: &str = include_str!("../data/stopwords_en.txt");
const STOPWORDS_VERSION: &str = "en-179-v1";

/// The pinned English stopword list used as the alignment seed lexicon.
#[derive(Debug)]
pub struct StopwordSet {
    ordered: Vec<&'static str>,
    lookup: HashSet<&'static str>,
    version: &'static str,
}

impl StopwordSet {
    pub fn contains(&self, token: &str) -> bool {
        self.lookup.contains(token)
    }

    /// Tokens in asset order.
    pub fn iter(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.ordered.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.ordered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ordered.is_empty()
    }

    pub fn version(&self) -> &'static str {
        self.version
    }
}

pub fn stopwords() -> &'static StopwordSet {
    static SET: OnceLock<StopwordSet> = OnceLock::new();
    SET.get_or_init(|| {
        let ordered: Vec<&'static str> = STOPWORDS_EN.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        let lookup = ordered.iter().copied().collect();
        StopwordSet {
            ordered,
            lookup,
            version: STOPWORDS_VERSION,
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VocabRole {
    Source,
    Target,
}

/// Tokens ordered by descending frequency, ties broken lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    entries: Vec<(String, u64)>,
    index: HashMap<String, usize>,
    pub role: VocabRole,
    pub warnings: Vec<String>,
}

impl Vocabulary {
    pub fn new(entries: Vec<(String, u64)>, role: VocabRole) -> Self {
        let index = entries.iter().enumerate().map(|(i, (t, _))| (t.clone(), i)).collect();
        Vocabulary {
            entries,
            index,
            role,
            warnings: Vec::new(),
        }
    }

    pub fn entries(&self) -> &[(String, u64)] {
        &self.entries
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(t, _)| t.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Position of `token` in frequency order.
    pub fn rank(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// The first `n` entries, keeping role and warnings.
    pub fn prefix(&self, n: usize) -> Vocabulary {
        let mut v = Vocabulary::new(self.entries[..n.min(self.entries.len())].to_vec(), self.role);
        v.warnings = self.warnings.clone();
        v
    }

    /// `token<TAB>frequency` per line.
    pub fn write_to<W: Write>(&self, mut sink: W) -> Result<()> {
        for (token, freq) in &self.entries {
            writeln!(sink, "{token}\t{freq}")?;
        }
        sink.flush()?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(source: R, role: VocabRole) -> Result<Self> {
        let mut entries = Vec::new();
        for (idx, line) in source.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let bad = |message: &str| Error::Format {
                line: idx + 1,
                message: message.to_string(),
            };
            let (token, freq) = line
                .split_once('\t')
                .ok_or_else(|| bad("expected token<TAB>frequency"))?;
            let freq = freq.trim().parse().map_err(|_| bad("frequency is not an integer"))?;
            entries.push((token.to_string(), freq));
        }
        Ok(Vocabulary::new(entries, role))
    }
}

fn ranked<K: AsRef<str> + Ord>(counts: HashMap<K, u64>) -> Vec<(K, u64)> {
    let mut v: Vec<(K, u64)> = counts.into_iter().collect();
    v.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v
}

fn split_ranked(
    ranked: Vec<(String, u64)>,
    source_size: usize,
    target_size: usize,
) -> Result<(Vocabulary, Vocabulary)> {
    if source_size > target_size {
        return Err(Error::Config(format!(
            "source size {source_size} exceeds target size {target_size}"
        )));
    }
    if ranked.len() < source_size {
        return Err(Error::VocabularyUnderflow {
            eligible: ranked.len(),
            required: source_size,
        });
    }
    let source = Vocabulary::new(ranked[..source_size].to_vec(), VocabRole::Source);
    let mut target_entries = ranked;
    let mut warnings = Vec::new();
    if target_entries.len() < target_size {
        warnings.push(format!(
            "target vocabulary truncated to {} of {} requested entries",
            target_entries.len(),
            target_size
        ));
    }
    target_entries.truncate(target_size);
    let mut target = Vocabulary::new(target_entries, VocabRole::Target);
    target.warnings = warnings;
    Ok((source, target))
}

/// Ranks non-stopword tokens over the concatenation of `corpora` and splits
/// off the top `source_size` and `target_size`.
pub fn build_vocab(corpora: &[Corpus], source_size: usize, target_size: usize) -> Result<(Vocabulary, Vocabulary)> {
    let stop = stopwords();
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for token in corpora.iter().flat_map(Corpus::tokens) {
        if !stop.contains(token) {
            *counts.entry(token).or_default() += 1;
        }
    }
    let ranked = ranked(counts).into_iter().map(|(t, n)| (t.to_string(), n)).collect();
    split_ranked(ranked, source_size, target_size)
}

/// Like [`build_vocab`] but over within-document trigrams. Entries are the
/// merged token form (`a_b_c`); all-stopword trigrams are excluded.
pub fn build_trigram_vocab(
    corpora: &[Corpus],
    source_size: usize,
    target_size: usize,
) -> Result<(Vocabulary, Vocabulary)> {
    let stop = stopwords();
    let mut counts: HashMap<[&str; 3], u64> = HashMap::new();
    for doc in corpora.iter().flat_map(Corpus::documents) {
        for w in doc.windows(3) {
            let key = [w[0].as_str(), w[1].as_str(), w[2].as_str()];
            if key.iter().all(|t| stop.contains(t)) {
                continue;
            }
            *counts.entry(key).or_default() += 1;
        }
    }
    let joined: HashMap<String, u64> = counts
        .into_iter()
        .map(|(k, n)| (join_trigram(k[0], k[1], k[2]), n))
        .collect();
    split_ranked(ranked(joined), source_size, target_size)
}

pub fn join_trigram(a: &str, b: &str, c: &str) -> String {
    let mut s = String::with_capacity(a.len() + b.len() + c.len() + 2);
    s.push_str(a);
    s.push(TRIGRAM_JOINER);
    s.push_str(b);
    s.push(TRIGRAM_JOINER);
    s.push_str(c);
    s
}

/// Lookup set of trigrams to merge, keyed by the joined token form.
#[derive(Debug, Clone, Default)]
pub struct TrigramSet {
    set: HashSet<String>,
}

impl TrigramSet {
    pub fn from_vocab(vocab: &Vocabulary) -> Self {
        vocab.tokens().collect()
    }

    pub fn contains(&self, a: &str, b: &str, c: &str) -> bool {
        self.set.contains(&join_trigram(a, b, c))
    }

    pub fn contains_joined(&self, joined: &str) -> bool {
        self.set.contains(joined)
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }
}

impl<'a> FromIterator<&'a str> for TrigramSet {
    /// Accepts either `a_b_c` or `a b c` spellings.
    fn from_iter<I: IntoIterator<Item = &'a str>>(iter: I) -> Self {
        let set = iter
            .into_iter()
            .filter_map(|t| {
                let mut parts = t.split([TRIGRAM_JOINER, ' ']);
                match (parts.next(), parts.next(), parts.next(), parts.next()) {
                    (Some(a), Some(b), Some(c), None) => Some(join_trigram(a, b, c)),
                    _ => None,
                }
            })
            .collect();
        TrigramSet { set }
    }
}

/// Replaces vocabulary trigrams by single joined tokens, scanning each
/// document left to right and merging greedily without overlap.
pub fn merge_trigrams(corpus: &Corpus, trigrams: &TrigramSet) -> Corpus {
    let documents = corpus
        .documents()
        .iter()
        .map(|doc| {
            let mut out = Vec::with_capacity(doc.len());
            let mut key = String::new();
            let mut i = 0;
            while i < doc.len() {
                let hit = i + 2 < doc.len() && {
                    key.clear();
                    key.push_str(&doc[i]);
                    key.push(TRIGRAM_JOINER);
                    key.push_str(&doc[i + 1]);
                    key.push(TRIGRAM_JOINER);
                    key.push_str(&doc[i + 2]);
                    trigrams.contains_joined(&key)
                };
                if hit {
                    out.push(key.clone());
                    i += 3;
                } else {
                    out.push(doc[i].clone());
                    i += 1;
                }
            }
            out
        })
        .collect();
    Corpus::new(corpus.language_id.clone(), documents).with_provenance(corpus.provenance.clone())
}
