//! Comment/video ingestion: JSONL parsing, text preprocessing, user-to-channel
//! assignment, corpus construction and token balancing.

use std::collections::{BTreeMap, HashSet};
use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, CorpusProvenance, Period};
use crate::error::{Error, Result};

/// Default fraction of malformed lines tolerated before a parse aborts.
pub const DEFAULT_MAX_MALFORMED: f64 = 0.01;

/// Relative tolerance around the smallest corpus when balancing.
pub const BALANCE_TOLERANCE: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentRecord {
    pub comment_id: String,
    pub video_id: String,
    pub channel_id: String,
    pub user_id: String,
    pub posted_at: i64,
    pub text: String,
    pub is_reply: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub video_id: String,
    pub channel_id: String,
    pub uploaded_at: i64,
    pub like_count: u64,
    pub dislike_count: u64,
}

/// A JSONL record type with an identity and structural invariants.
pub trait Record: DeserializeOwned {
    fn id(&self) -> &str;
    fn validate(&self) -> std::result::Result<(), String>;
}

impl Record for CommentRecord {
    fn id(&self) -> &str {
        &self.comment_id
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.comment_id.is_empty() {
            return Err("empty comment_id".into());
        }
        if self.is_reply != self.parent_id.is_some() {
            return Err("is_reply must be set exactly when parent_id is present".into());
        }
        if self.posted_at < 0 {
            return Err("negative posted_at".into());
        }
        Ok(())
    }
}

impl Record for VideoRecord {
    fn id(&self) -> &str {
        &self.video_id
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.video_id.is_empty() {
            return Err("empty video_id".into());
        }
        if self.uploaded_at < 0 {
            return Err("negative uploaded_at".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LineError {
    /// 1-based line number.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Parsed<R> {
    pub records: Vec<R>,
    pub errors: Vec<LineError>,
    pub lines: usize,
}

/// Parses line-delimited JSON records. Blank lines are ignored. Malformed or
/// invalid lines (including duplicate ids) are tallied; when their share of
/// non-blank lines exceeds `max_malformed` the whole parse fails.
pub fn parse_records<R: Record, B: BufRead>(mut stream: B, max_malformed: f64) -> Result<Parsed<R>> {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    let mut seen = HashSet::new();
    let mut buf = Vec::new();
    let mut line_no = 0;
    let mut lines = 0;
    loop {
        buf.clear();
        if stream.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let trimmed = buf.trim_ascii();
        if trimmed.is_empty() {
            continue;
        }
        lines += 1;
        let outcome = serde_json::from_slice::<R>(trimmed)
            .map_err(|e| e.to_string())
            .and_then(|r| r.validate().map(|_| r))
            .and_then(|r| {
                if seen.insert(r.id().to_string()) {
                    Ok(r)
                } else {
                    Err(format!("duplicate id `{}`", r.id()))
                }
            });
        match outcome {
            Ok(r) => records.push(r),
            Err(reason) => errors.push(LineError { line: line_no, reason }),
        }
    }
    if lines > 0 && errors.len() as f64 > max_malformed * lines as f64 {
        let first = &errors[0];
        return Err(Error::ParseFailure {
            malformed: errors.len(),
            total: lines,
            first_line: first.line,
            reason: first.reason.clone(),
        });
    }
    Ok(Parsed { records, errors, lines })
}

/// Drops non-ASCII code points, blanks every non-alphanumeric character,
/// lowercases and splits on whitespace.
pub fn preprocess_text(raw: &str) -> Vec<String> {
    let cleaned: String = raw
        .chars()
        .filter(char::is_ascii)
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                ' '
            }
        })
        .collect();
    cleaned.split_whitespace().map(str::to_string).collect()
}

/// Per-user comment counts and the resulting channel assignment.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserAssignment {
    pub channels: Vec<String>,
    pub counts: BTreeMap<String, BTreeMap<String, usize>>,
    /// `None` marks an unassigned user (tie or no activity).
    pub assigned: BTreeMap<String, Option<String>>,
}

impl UserAssignment {
    pub fn channel_of(&self, user: &str) -> Option<&str> {
        self.assigned.get(user).and_then(|c| c.as_deref())
    }

    pub fn users_on(&self, channel: &str) -> usize {
        self.assigned.values().filter(|c| c.as_deref() == Some(channel)).count()
    }
}

/// Assigns each user to the channel they commented on strictly more than any
/// other channel in `channels` during `period`.
pub fn assign_users(comments: &[CommentRecord], channels: &[String], period: Period) -> UserAssignment {
    let mut counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for c in comments {
        if period.contains(c.posted_at) && channels.contains(&c.channel_id) {
            *counts
                .entry(c.user_id.clone())
                .or_default()
                .entry(c.channel_id.clone())
                .or_default() += 1;
        }
    }
    let assigned = counts
        .iter()
        .map(|(user, per_channel)| {
            let mut best: Option<(&String, usize)> = None;
            let mut tied = false;
            for (channel, &n) in per_channel {
                match best {
                    Some((_, m)) if n == m => tied = true,
                    Some((_, m)) if n < m => {}
                    _ => {
                        best = Some((channel, n));
                        tied = false;
                    }
                }
            }
            let channel = match best {
                Some((c, n)) if n > 0 && !tied => Some(c.clone()),
                _ => None,
            };
            (user.clone(), channel)
        })
        .collect();
    UserAssignment {
        channels: channels.to_vec(),
        counts,
        assigned,
    }
}

/// Collects the comments on `channel` inside `period` into a corpus, one
/// preprocessed document per comment.
pub fn build_corpus(
    comments: &[CommentRecord],
    channel: &str,
    period: Period,
    assignment: Option<&UserAssignment>,
    include_replies: bool,
) -> Result<Corpus> {
    if let Some(a) = assignment {
        if !a.channels.iter().any(|c| c == channel) {
            return Err(Error::Config(format!(
                "user assignment does not cover channel `{channel}`"
            )));
        }
    }
    let documents: Vec<Vec<String>> = comments
        .iter()
        .filter(|c| c.channel_id == channel && period.contains(c.posted_at))
        .filter(|c| include_replies || !c.is_reply)
        .filter(|c| assignment.is_none_or(|a| a.channel_of(&c.user_id) == Some(channel)))
        .map(|c| preprocess_text(&c.text))
        .filter(|d| !d.is_empty())
        .collect();
    if documents.is_empty() {
        return Err(Error::EmptyCorpus(channel.to_string()));
    }
    let provenance = CorpusProvenance {
        period: Some(period),
        channels: assignment
            .map(|a| a.channels.clone())
            .unwrap_or_else(|| vec![channel.to_string()]),
        user_filter: assignment.is_some(),
        include_replies,
        balance_seed: None,
        origin: Some("comments".into()),
    };
    Ok(Corpus::new(channel, documents).with_provenance(provenance))
}

/// Downsamples every corpus to the smallest token count (within
/// [`BALANCE_TOLERANCE`]) by removing whole documents at random.
pub fn token_balance(corpora: &[Corpus], seed: u64) -> Result<Vec<Corpus>> {
    if corpora.len() < 2 {
        return Err(Error::Config("token balancing needs at least two corpora".into()));
    }
    if let Some(c) = corpora.iter().find(|c| c.is_empty()) {
        return Err(Error::EmptyCorpus(c.language_id.clone()));
    }
    let target = corpora.iter().map(Corpus::token_count).min().unwrap_or(0);
    let upper = (target as f64 * (1.0 + BALANCE_TOLERANCE)).floor() as usize;
    let lower = (target as f64 * (1.0 - BALANCE_TOLERANCE)).ceil() as usize;

    corpora
        .iter()
        .enumerate()
        .map(|(i, corpus)| {
            let mut provenance = corpus.provenance.clone();
            provenance.balance_seed = Some(seed);
            if corpus.token_count() == target {
                return Ok(corpus.clone().with_provenance(provenance));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let docs = corpus.documents();
            let mut order: Vec<usize> = (0..docs.len()).collect();
            order.shuffle(&mut rng);

            let mut keep = vec![false; docs.len()];
            let mut total = 0;
            for idx in order {
                if total >= target {
                    break;
                }
                let len = docs[idx].len();
                if total + len <= upper {
                    keep[idx] = true;
                    total += len;
                }
            }
            if total < lower {
                return Err(Error::BalanceFailure {
                    corpus: corpus.language_id.clone(),
                    reached: total,
                    target,
                });
            }
            let selected = docs
                .iter()
                .zip(&keep)
                .filter(|(_, &k)| k)
                .map(|(d, _)| d.clone())
                .collect();
            Ok(Corpus::new(corpus.language_id.clone(), selected).with_provenance(provenance))
        })
        .collect()
}
