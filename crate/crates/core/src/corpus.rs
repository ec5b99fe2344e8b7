//! Tokenized corpora and their on-disk text format.
//!
//! A corpus file holds one document per line, tokens separated by single
//! spaces. An optional first line starting with `#corpus ` carries the
//! language id and provenance as JSON.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const HEADER_PREFIX: &str = "#corpus ";

/// Half-open time range `[start, end)` in UTC seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Period {
    pub start: i64,
    pub end: i64,
}

impl Period {
    pub fn new(start: i64, end: i64) -> Result<Self> {
        if start > end {
            return Err(Error::Config(format!("period start {start} is after end {end}")));
        }
        Ok(Period { start, end })
    }

    /// Covers every timestamp.
    pub fn unbounded() -> Self {
        Period {
            start: i64::MIN,
            end: i64::MAX,
        }
    }

    /// Calendar year in UTC.
    pub fn year(year: i32) -> Self {
        use chrono::{NaiveDate, NaiveTime};
        let start = |y: i32| {
            NaiveDate::from_ymd_opt(y, 1, 1)
                .expect("valid year")
                .and_time(NaiveTime::MIN)
                .and_utc()
                .timestamp()
        };
        Period {
            start: start(year),
            end: start(year + 1),
        }
    }

    pub fn contains(&self, t: i64) -> bool {
        t >= self.start && t < self.end
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusProvenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<Period>,
    #[serde(default)]
    pub channels: Vec<String>,
    #[serde(default)]
    pub user_filter: bool,
    #[serde(default)]
    pub include_replies: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub balance_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<String>,
}

/// A sequence of tokenized documents standing for one "language".
///
/// Tokens produced by preprocessing match `[a-z0-9]+`; trigram merging adds
/// `_` joiners. Empty documents are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub language_id: String,
    documents: Vec<Vec<String>>,
    token_count: usize,
    pub provenance: CorpusProvenance,
}

impl Corpus {
    pub fn new(language_id: impl Into<String>, documents: Vec<Vec<String>>) -> Self {
        let documents: Vec<Vec<String>> = documents.into_iter().filter(|d| !d.is_empty()).collect();
        let token_count = documents.iter().map(Vec::len).sum();
        Corpus {
            language_id: language_id.into(),
            documents,
            token_count,
            provenance: CorpusProvenance::default(),
        }
    }

    pub fn with_provenance(mut self, provenance: CorpusProvenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn documents(&self) -> &[Vec<String>] {
        &self.documents
    }

    pub fn into_documents(self) -> Vec<Vec<String>> {
        self.documents
    }

    pub fn token_count(&self) -> usize {
        self.token_count
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.documents.iter().flatten().map(String::as_str)
    }

    /// True when every token matches `[a-z0-9]+`.
    pub fn is_plain(&self) -> bool {
        self.tokens().all(is_plain_token)
    }

    pub fn write_to<W: Write>(&self, mut sink: W) -> Result<()> {
        #[derive(Serialize)]
        struct Header<'a> {
            language_id: &'a str,
            provenance: &'a CorpusProvenance,
        }
        let header = Header {
            language_id: &self.language_id,
            provenance: &self.provenance,
        };
        writeln!(
            sink,
            "{HEADER_PREFIX}{}",
            serde_json::to_string(&header).map_err(|e| Error::Config(e.to_string()))?
        )?;
        for doc in &self.documents {
            writeln!(sink, "{}", doc.join(" "))?;
        }
        sink.flush()?;
        Ok(())
    }

    /// Reads the corpus text format. `fallback_id` names the corpus when the
    /// file has no header line.
    pub fn read_from<R: BufRead>(source: R, fallback_id: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            language_id: String,
            #[serde(default)]
            provenance: CorpusProvenance,
        }
        let mut language_id = fallback_id.to_string();
        let mut provenance = CorpusProvenance::default();
        let mut documents = Vec::new();
        for (idx, line) in source.lines().enumerate() {
            let line = line?;
            if idx == 0 {
                if let Some(json) = line.strip_prefix(HEADER_PREFIX) {
                    let header: Header = serde_json::from_str(json).map_err(|e| Error::Format {
                        line: 1,
                        message: format!("bad corpus header: {e}"),
                    })?;
                    language_id = header.language_id;
                    provenance = header.provenance;
                    continue;
                }
            }
            let doc: Vec<String> = line.split_whitespace().map(str::to_string).collect();
            if !doc.is_empty() {
                documents.push(doc);
            }
        }
        Ok(Corpus::new(language_id, documents).with_provenance(provenance))
    }
}

pub fn is_plain_token(token: &str) -> bool {
    !token.is_empty() && token.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(s: &str) -> Vec<String> {
        s.split(' ').map(str::to_string).collect()
    }

    #[test]
    fn token_count_tracks_documents() {
        let c = Corpus::new("x", vec![doc("a b c"), vec![], doc("d")]);
        assert_eq!(c.len(), 2);
        assert_eq!(c.token_count(), 4);
        assert!(c.is_plain());
    }

    #[test]
    fn text_format_round_trip() {
        let c = Corpus::new("cnn", vec![doc("hello world"), doc("again")]).with_provenance(CorpusProvenance {
            channels: vec!["cnn".into()],
            balance_seed: Some(3),
            ..Default::default()
        });
        let mut buf = Vec::new();
        c.write_to(&mut buf).unwrap();
        let back = Corpus::read_from(&buf[..], "ignored").unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn headerless_file_uses_fallback_id() {
        let c = Corpus::read_from(&b"a b\n\nc\n"[..], "fox").unwrap();
        assert_eq!(c.language_id, "fox");
        assert_eq!(c.token_count(), 3);
    }

    #[test]
    fn period_rejects_reversed_bounds() {
        assert!(Period::new(5, 4).is_err());
        let y = Period::year(2020);
        assert_eq!(y.start, 1_577_836_800);
        assert!(y.contains(1_580_515_200));
        assert!(!y.contains(y.end));
    }
}
