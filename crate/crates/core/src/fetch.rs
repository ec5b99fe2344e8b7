//! Paged comment download from an HTTP endpoint.
//!
//! Protocol: `GET {base}/comments?channel={id}&page={token}` answers
//! `{"items":[CommentRecord...],"next":token?}`. The first request carries
//! no `page` parameter.

use std::collections::HashSet;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::ingest::{CommentRecord, Record};

#[derive(Debug, Deserialize)]
struct Page {
    items: Vec<CommentRecord>,
    #[serde(default)]
    next: Option<String>,
}

/// Fetches up to `page_limit` pages of comments for `channel_id`.
///
/// Records are de-duplicated by `comment_id`, so re-fetching overlapping
/// pages never yields a record twice. Page numbers in errors are 1-based.
pub fn fetch_comments(
    endpoint: &str,
    channel_id: &str,
    page_limit: usize,
    credentials: Option<&str>,
) -> Result<Vec<CommentRecord>> {
    let base = endpoint.trim_end_matches('/');
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut token: Option<String> = None;

    for page in 1..=page_limit {
        let mut request = ureq::get(format!("{base}/comments")).query("channel", channel_id);
        if let Some(t) = &token {
            request = request.query("page", t);
        }
        if let Some(c) = credentials {
            request = request.header("Authorization", format!("Bearer {c}"));
        }
        let network = |message: String| Error::Network { page, message };
        let mut response = request.call().map_err(|e| network(e.to_string()))?;
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| network(e.to_string()))?;
        let parsed: Page = serde_json::from_str(&body).map_err(|e| Error::ParseFailure {
            malformed: 1,
            total: 1,
            first_line: page,
            reason: format!("page {page} does not match the comment schema: {e}"),
        })?;
        for item in parsed.items {
            item.validate().map_err(|reason| Error::ParseFailure {
                malformed: 1,
                total: 1,
                first_line: page,
                reason,
            })?;
            if seen.insert(item.comment_id.clone()) {
                out.push(item);
            }
        }
        match parsed.next {
            Some(next) => token = Some(next),
            None => break,
        }
    }
    Ok(out)
}
