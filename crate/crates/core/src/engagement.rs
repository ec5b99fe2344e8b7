//! Audience engagement measures: per-video dislike share, its monthly
//! average per channel, paired t-tests between series, and how commenters
//! split their activity between two channels.

use std::collections::{BTreeMap, HashMap};

use chrono::{DateTime, Datelike};
use serde::{Deserialize, Serialize};

use crate::corpus::Period;
use crate::error::{Error, Result};
use crate::ingest::{CommentRecord, VideoRecord};
use crate::stats::student_t_two_sided;

pub const DEFAULT_MIN_VIDEOS: usize = 10;

/// `dislike / (like + dislike)`, or `None` for videos with no reactions.
pub fn disagreement(video: &VideoRecord) -> Option<f64> {
    let total = video.like_count as u128 + video.dislike_count as u128;
    (total > 0).then(|| video.dislike_count as f64 / total as f64)
}

/// A UTC calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Month {
    pub year: i32,
    pub month: u32,
}

impl Month {
    pub fn of(timestamp: i64) -> Option<Month> {
        DateTime::from_timestamp(timestamp, 0).map(|d| Month {
            year: d.year(),
            month: d.month(),
        })
    }
}

impl std::fmt::Display for Month {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthValue {
    pub month: Month,
    pub value: f64,
    /// Uploads in the month, including ones without reactions.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisagreementSeries {
    pub channel_id: String,
    pub points: Vec<MonthValue>,
    /// Videos skipped because they had no likes or dislikes.
    pub undefined: usize,
}

impl DisagreementSeries {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("month,value,count\n");
        for p in &self.points {
            out.push_str(&format!("{},{:.6},{}\n", p.month, p.value, p.count));
        }
        out
    }

    pub fn value_at(&self, month: Month) -> Option<f64> {
        self.points.iter().find(|p| p.month == month).map(|p| p.value)
    }
}

/// Mean disagreement per month for one channel. Months with fewer than
/// `min_videos` uploads are dropped, as are months whose uploads all lack
/// reactions.
pub fn monthly_series(videos: &[VideoRecord], channel: &str, period: Period, min_videos: usize) -> DisagreementSeries {
    let mut months: BTreeMap<Month, (usize, f64, usize)> = BTreeMap::new();
    let mut undefined = 0;
    for v in videos {
        if v.channel_id != channel || !period.contains(v.uploaded_at) {
            continue;
        }
        let Some(month) = Month::of(v.uploaded_at) else {
            continue;
        };
        let slot = months.entry(month).or_default();
        slot.0 += 1;
        match disagreement(v) {
            Some(d) => {
                slot.1 += d;
                slot.2 += 1;
            }
            None => undefined += 1,
        }
    }
    let points = months
        .into_iter()
        .filter(|(_, (uploads, _, defined))| *uploads >= min_videos && *defined > 0)
        .map(|(month, (uploads, sum, defined))| MonthValue {
            month,
            value: sum / defined as f64,
            count: uploads,
        })
        .collect();
    DisagreementSeries {
        channel_id: channel.to_string(),
        points,
        undefined,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: usize,
}

/// Paired two-sided t-test on `a[i] − b[i]`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Config(format!(
            "paired samples differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Config("a paired t-test needs at least two pairs".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if d.iter().all(|&x| x == d[0]) {
        return Err(Error::DegenerateVariance);
    }
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    if var == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let t = mean / (var.sqrt() / nf.sqrt());
    let df = n - 1;
    Ok(TTest {
        t,
        p: student_t_two_sided(t, df as f64),
        df,
    })
}

/// Aligns two series on the months they share, for [`paired_t_test`].
pub fn pair_series(a: &DisagreementSeries, b: &DisagreementSeries) -> (Vec<Month>, Vec<f64>, Vec<f64>) {
    let other: HashMap<Month, f64> = b.points.iter().map(|p| (p.month, p.value)).collect();
    let mut months = Vec::new();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for p in &a.points {
        if let Some(&y) = other.get(&p.month) {
            months.push(p.month);
            xs.push(p.value);
            ys.push(y);
        }
    }
    (months, xs, ys)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShareCategory {
    /// Users active only on A.
    ASoleA,
    /// Users active only on B.
    BSoleB,
    /// A-majority users, comments on A.
    AMajA,
    /// A-majority users, comments on B.
    AMajB,
    /// B-majority users, comments on A.
    BMajA,
    /// B-majority users, comments on B.
    BMajB,
    Equal,
}

impl ShareCategory {
    pub const ALL: [ShareCategory; 7] = [
        ShareCategory::ASoleA,
        ShareCategory::BSoleB,
        ShareCategory::AMajA,
        ShareCategory::AMajB,
        ShareCategory::BMajA,
        ShareCategory::BMajB,
        ShareCategory::Equal,
    ];

    /// Label with the channel names substituted, e.g. `cnn_maj^fox`.
    pub fn label(self, a: &str, b: &str) -> String {
        match self {
            ShareCategory::ASoleA => format!("{a}_sole^{a}"),
            ShareCategory::BSoleB => format!("{b}_sole^{b}"),
            ShareCategory::AMajA => format!("{a}_maj^{a}"),
            ShareCategory::AMajB => format!("{a}_maj^{b}"),
            ShareCategory::BMajA => format!("{b}_maj^{a}"),
            ShareCategory::BMajB => format!("{b}_maj^{b}"),
            ShareCategory::Equal => "equal".to_string(),
        }
    }

    /// Category of a comment on A (`on_a`) or B by a user with the given
    /// yearly counts. Both counts include the comment itself.
    pub fn classify(u_a: usize, u_b: usize, on_a: bool) -> ShareCategory {
        use std::cmp::Ordering::*;
        match (u_a > 0, u_b > 0) {
            (true, false) => ShareCategory::ASoleA,
            (false, true) => ShareCategory::BSoleB,
            _ => match (u_a.cmp(&u_b), on_a) {
                (Equal, _) => ShareCategory::Equal,
                (Greater, true) => ShareCategory::AMajA,
                (Greater, false) => ShareCategory::AMajB,
                (Less, true) => ShareCategory::BMajA,
                (Less, false) => ShareCategory::BMajB,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommentShareBreakdown {
    pub year: i32,
    pub channel_a: String,
    pub channel_b: String,
    /// Counts in [`ShareCategory::ALL`] order.
    pub counts: [usize; 7],
    pub total: usize,
}

impl CommentShareBreakdown {
    pub fn count(&self, c: ShareCategory) -> usize {
        self.counts[ShareCategory::ALL.iter().position(|&x| x == c).unwrap()]
    }

    pub fn shares(&self) -> [f64; 7] {
        let mut out = [0.0; 7];
        if self.total > 0 {
            for (o, &c) in out.iter_mut().zip(&self.counts) {
                *o = c as f64 / self.total as f64;
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("category,count,share\n");
        for ((cat, count), share) in ShareCategory::ALL.iter().zip(self.counts).zip(self.shares()) {
            out.push_str(&format!(
                "{},{},{:.6}\n",
                cat.label(&self.channel_a, &self.channel_b),
                count,
                share
            ));
        }
        out
    }
}

/// Splits the year's comments on `a` and `b` into the seven activity
/// categories. Comments on other channels are ignored.
pub fn comment_share(comments: &[CommentRecord], a: &str, b: &str, year: i32) -> Result<CommentShareBreakdown> {
    if a == b {
        return Err(Error::Config("comment share needs two distinct channels".into()));
    }
    let period = Period::year(year);
    let relevant: Vec<&CommentRecord> = comments
        .iter()
        .filter(|c| period.contains(c.posted_at) && (c.channel_id == a || c.channel_id == b))
        .collect();
    let mut per_user: HashMap<&str, (usize, usize)> = HashMap::new();
    for c in &relevant {
        let e = per_user.entry(c.user_id.as_str()).or_default();
        if c.channel_id == a {
            e.0 += 1;
        } else {
            e.1 += 1;
        }
    }
    let mut counts = [0usize; 7];
    for c in &relevant {
        let (u_a, u_b) = per_user[c.user_id.as_str()];
        let cat = ShareCategory::classify(u_a, u_b, c.channel_id == a);
        counts[ShareCategory::ALL.iter().position(|&x| x == cat).unwrap()] += 1;
    }
    Ok(CommentShareBreakdown {
        year,
        channel_a: a.to_string(),
        channel_b: b.to_string(),
        counts,
        total: relevant.len(),
    })
}

/// Comment count per UTC month for one channel.
pub fn monthly_comment_volume(comments: &[CommentRecord], channel: &str, period: Period) -> BTreeMap<Month, usize> {
    let mut out = BTreeMap::new();
    for c in comments {
        if c.channel_id == channel && period.contains(c.posted_at) {
            if let Some(m) = Month::of(c.posted_at) {
                *out.entry(m).or_default() += 1;
            }
        }
    }
    out
}
