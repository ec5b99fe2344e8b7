//! Embedding text format with optional binary trailer sections.
//!
//! The text part is the usual `<vocab_size> <dimension>` header followed by
//! `token v1 ... vd` rows with six-decimal values. After the last row the
//! writer appends a metadata section (JSON) and, when subword features are
//! present, the bucket table as little-endian `f32`s. Readers that stop after
//! `vocab_size` rows never see the trailer.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{EmbeddingSpace, SpaceProvenance, SubwordTable};
use crate::error::{Error, Result};

const META_MAGIC: &[u8; 12] = b"DIALIGN\0META";
const SUBWORD_MAGIC: &[u8; 12] = b"DIALIGN\0SUBW";

#[derive(Serialize, Deserialize)]
struct Meta {
    language_id: String,
    counts: Vec<u64>,
    provenance: SpaceProvenance,
}

fn format_err(line: usize, message: impl Into<String>) -> Error {
    Error::Format {
        line,
        message: message.into(),
    }
}

impl EmbeddingSpace {
    pub fn save<W: Write>(&self, mut sink: W) -> Result<()> {
        let dim = self.dimension();
        writeln!(sink, "{} {}", self.len(), dim)?;
        let mut line = String::new();
        for (i, token) in self.tokens().iter().enumerate() {
            line.clear();
            line.push_str(token);
            for v in self.row(i) {
                line.push(' ');
                line.push_str(&format!("{v:.6}"));
            }
            line.push('\n');
            sink.write_all(line.as_bytes())?;
        }

        let meta = Meta {
            language_id: self.language_id.clone(),
            counts: self.counts().to_vec(),
            provenance: self.provenance.clone(),
        };
        let json = serde_json::to_vec(&meta).map_err(|e| Error::Config(e.to_string()))?;
        sink.write_all(META_MAGIC)?;
        sink.write_all(&(json.len() as u64).to_le_bytes())?;
        sink.write_all(&json)?;

        if let Some(sub) = self.subword() {
            sink.write_all(SUBWORD_MAGIC)?;
            for v in [sub.min_n, sub.max_n, sub.buckets, dim] {
                sink.write_all(&(v as u32).to_le_bytes())?;
            }
            let mut buf = Vec::with_capacity(sub.vectors.len() * 4);
            for v in &sub.vectors {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            sink.write_all(&buf)?;
        }
        sink.flush()?;
        Ok(())
    }

    /// Reads the format written by [`EmbeddingSpace::save`]; plain text files
    /// without trailer sections are accepted too.
    pub fn load<R: BufRead>(mut source: R, fallback_id: &str) -> Result<Self> {
        let mut buf = Vec::new();
        source.read_until(b'\n', &mut buf)?;
        let header = std::str::from_utf8(&buf).map_err(|_| format_err(1, "header is not UTF-8"))?;
        let mut parts = header.split_whitespace();
        let parse = |s: Option<&str>| s.and_then(|s| s.parse::<usize>().ok());
        let (n, dim) = match (parse(parts.next()), parse(parts.next()), parts.next()) {
            (Some(n), Some(d), None) if d > 0 => (n, d),
            _ => return Err(format_err(1, "expected `<vocab_size> <dimension>`")),
        };

        let mut tokens = Vec::with_capacity(n);
        let mut vectors = Vec::with_capacity(n * dim);
        for i in 0..n {
            let line_no = i + 2;
            buf.clear();
            if source.read_until(b'\n', &mut buf)? == 0 {
                return Err(format_err(line_no, format!("expected {n} rows, file ends early")));
            }
            let text = std::str::from_utf8(&buf).map_err(|_| format_err(line_no, "row is not UTF-8"))?;
            let mut fields = text.split_whitespace();
            let token = fields.next().ok_or_else(|| format_err(line_no, "empty row"))?;
            let before = vectors.len();
            for f in fields {
                let v: f32 = f.parse().map_err(|_| format_err(line_no, format!("bad value `{f}`")))?;
                vectors.push(v);
            }
            let found = vectors.len() - before;
            if found != dim {
                return Err(format_err(line_no, format!("expected {dim} values, found {found}")));
            }
            tokens.push(token.to_string());
        }

        let mut rest = Vec::new();
        source.read_to_end(&mut rest)?;
        let trailer_line = n + 2;
        let mut cursor = &rest[..];
        let mut language_id = fallback_id.to_string();
        let mut counts = vec![0; n];
        let mut provenance = SpaceProvenance {
            config: None,
            corpus_tokens: 0,
            epoch_losses: Vec::new(),
        };
        let mut subword = None;
        while !cursor.is_empty() {
            if cursor.len() < 12 {
                return Err(format_err(trailer_line, "truncated trailer"));
            }
            let (magic, body) = cursor.split_at(12);
            if magic == META_MAGIC {
                let len = read_u64(body, trailer_line)? as usize;
                let body = &body[8..];
                if body.len() < len {
                    return Err(format_err(trailer_line, "truncated metadata section"));
                }
                let meta: Meta = serde_json::from_slice(&body[..len])
                    .map_err(|e| format_err(trailer_line, format!("bad metadata: {e}")))?;
                if meta.counts.len() != n {
                    return Err(format_err(
                        trailer_line,
                        "metadata count list does not match vocabulary",
                    ));
                }
                language_id = meta.language_id;
                counts = meta.counts;
                provenance = meta.provenance;
                cursor = &body[len..];
            } else if magic == SUBWORD_MAGIC {
                if body.len() < 16 {
                    return Err(format_err(trailer_line, "truncated subword header"));
                }
                let field = |k: usize| u32::from_le_bytes(body[k * 4..k * 4 + 4].try_into().unwrap()) as usize;
                let (min_n, max_n, buckets, sub_dim) = (field(0), field(1), field(2), field(3));
                if sub_dim != dim {
                    return Err(format_err(
                        trailer_line,
                        format!("subword dimension {sub_dim} does not match header dimension {dim}"),
                    ));
                }
                let bytes = buckets * dim * 4;
                let data = &body[16..];
                if data.len() < bytes {
                    return Err(format_err(trailer_line, "truncated subword table"));
                }
                let vectors = data[..bytes]
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                subword = Some(SubwordTable {
                    min_n,
                    max_n,
                    buckets,
                    vectors,
                });
                cursor = &data[bytes..];
            } else {
                return Err(format_err(trailer_line, "unknown trailer section"));
            }
        }

        Ok(EmbeddingSpace::assemble(
            language_id,
            dim,
            tokens,
            counts,
            vectors,
            subword,
            provenance,
        ))
    }
}

fn read_u64(body: &[u8], line: usize) -> Result<u64> {
    body.get(..8)
        .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
        .ok_or_else(|| format_err(line, "truncated section length"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> EmbeddingSpace {
        EmbeddingSpace::from_parts(
            "s",
            4,
            vec!["a".into(), "b".into(), "c".into()],
            vec![
                0.1, -0.2, 0.3, 0.4, 1.0, 2.0, -3.5, 0.0, 0.123456, 0.654321, -0.000001, 9.5,
            ],
        )
        .unwrap()
    }

    #[test]
    fn header_and_round_trip() {
        let s = space();
        let mut buf = Vec::new();
        s.save(&mut buf).unwrap();
        let first = buf.split(|&b| b == b'\n').next().unwrap();
        assert_eq!(first, b"3 4");
        let back = EmbeddingSpace::load(&buf[..], "x").unwrap();
        assert_eq!(back.tokens(), s.tokens());
        assert_eq!(back.language_id, "s");
        for (x, y) in back.raw_vectors().iter().zip(s.raw_vectors()) {
            assert!((x - y).abs() <= 1e-6);
        }
    }

    #[test]
    fn short_row_is_a_format_error() {
        let mut text = String::from("2 100\n");
        text.push('a');
        for _ in 0..100 {
            text.push_str(" 0.5");
        }
        text.push('\n');
        text.push('b');
        for _ in 0..99 {
            text.push_str(" 0.5");
        }
        text.push('\n');
        match EmbeddingSpace::load(text.as_bytes(), "x") {
            Err(Error::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn subword_section_round_trip() {
        let table = SubwordTable {
            min_n: 3,
            max_n: 5,
            buckets: 7,
            vectors: (0..28).map(|i| i as f32 * 0.25).collect(),
        };
        let s = space().with_subword(table.clone());
        let mut buf = Vec::new();
        s.save(&mut buf).unwrap();
        let back = EmbeddingSpace::load(&buf[..], "x").unwrap();
        assert_eq!(back.subword(), Some(&table));
        assert_eq!(back.vector("zebra"), s.vector("zebra"));
    }
}
