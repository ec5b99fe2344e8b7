//! Disagreement series, paired t-tests and comment-share partitions.

mod common;

use common::{civil_month, monthly_oracle, share_oracle};
use dialign::engagement::{comment_share, disagreement, monthly_series, paired_t_test, Month};
use dialign::ingest::{CommentRecord, VideoRecord};
use dialign::stats::student_t_two_sided;
use dialign::Period;
use proptest::prelude::*;

const JAN_2019: i64 = 1_546_300_800;
const YEAR: i64 = 365 * 86_400;

fn arb_video() -> impl Strategy<Value = VideoRecord> {
    (
        prop::sample::select(vec!["cnn", "fox"]),
        JAN_2019..JAN_2019 + 2 * YEAR,
        0u64..500,
        0u64..500,
    )
        .prop_map(|(channel, uploaded_at, like_count, dislike_count)| VideoRecord {
            video_id: String::new(),
            channel_id: channel.into(),
            uploaded_at,
            like_count,
            dislike_count,
        })
}

fn arb_comment() -> impl Strategy<Value = CommentRecord> {
    (
        0usize..8,
        prop::sample::select(vec!["cnn", "fox", "msnbc"]),
        JAN_2019..JAN_2019 + 2 * YEAR,
    )
        .prop_map(|(user, channel, posted_at)| CommentRecord {
            comment_id: String::new(),
            video_id: "v".into(),
            channel_id: channel.into(),
            user_id: format!("u{user}"),
            posted_at,
            text: String::new(),
            is_reply: false,
            parent_id: None,
        })
}

proptest! {
    #[test]
    fn monthly_series_matches_oracle(videos in prop::collection::vec(arb_video(), 0..200), min in 0usize..6) {
        let series = monthly_series(&videos, "cnn", Period::unbounded(), min);
        let oracle = monthly_oracle(&videos, "cnn", min);
        prop_assert_eq!(series.points.len(), oracle.len());
        for (p, (m, (count, mean))) in series.points.iter().zip(&oracle) {
            prop_assert_eq!((p.month.year, p.month.month), *m);
            prop_assert_eq!(p.count, *count);
            prop_assert!((p.value - mean).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&p.value));
        }
        prop_assert!(series.points.windows(2).all(|w| w[0].month < w[1].month));
    }

    #[test]
    fn disagreement_is_a_fraction(v in arb_video()) {
        match disagreement(&v) {
            Some(d) => prop_assert!((0.0..=1.0).contains(&d)),
            None => prop_assert_eq!(v.like_count + v.dislike_count, 0),
        }
    }

    #[test]
    fn one_video_moves_a_month_by_at_most_one_over_n(
        reactions in prop::collection::vec((0u64..50, 1u64..50), 2..30),
        drop in any::<prop::sample::Index>(),
    ) {
        let videos: Vec<VideoRecord> = reactions
            .iter()
            .enumerate()
            .map(|(i, &(l, d))| VideoRecord {
                video_id: format!("v{i}"),
                channel_id: "cnn".into(),
                uploaded_at: JAN_2019 + i as i64,
                like_count: l,
                dislike_count: d,
            })
            .collect();
        let n = videos.len();
        let full = monthly_series(&videos, "cnn", Period::unbounded(), 1).points[0].value;
        let mut fewer = videos.clone();
        fewer.remove(drop.index(n));
        let partial = monthly_series(&fewer, "cnn", Period::unbounded(), 1).points[0].value;
        prop_assert!((full - partial).abs() <= 1.0 / n as f64 + 1e-12);
    }

    #[test]
    fn t_statistic_is_antisymmetric(
        pairs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2..40),
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        if let (Ok(x), Ok(y)) = (paired_t_test(&a, &b), paired_t_test(&b, &a)) {
            prop_assert_eq!(x.t, -y.t);
            prop_assert_eq!(x.p, y.p);
            prop_assert!((0.0..=1.0).contains(&x.p));
        }
    }

    #[test]
    fn comment_share_partitions_the_year(comments in prop::collection::vec(arb_comment(), 0..80), year in 2019i32..2021) {
        let share = comment_share(&comments, "cnn", "fox", year).unwrap();
        prop_assert_eq!(share.counts, share_oracle(&comments, "cnn", "fox", year));
        let in_year = comments
            .iter()
            .filter(|c| civil_month(c.posted_at).0 == year && c.channel_id != "msnbc")
            .count();
        prop_assert_eq!(share.counts.iter().sum::<usize>(), in_year);
        prop_assert_eq!(share.total, in_year);
        if in_year > 0 {
            prop_assert!((share.shares().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }
}

#[test]
fn hand_computed_t_test() {
    let r = paired_t_test(&[2.0, 2.0, 2.0, 3.0], &[1.0, 1.0, 1.0, 1.0]).unwrap();
    assert!((r.t - 5.0).abs() < 1e-12);
    assert_eq!(r.df, 3);
    assert!((student_t_two_sided(2.228, 10.0) - 0.05).abs() <= 1e-3);
}

#[test]
fn months_are_utc() {
    // 2020-01-31T23:30:00Z
    assert_eq!(Month::of(1_580_513_400).unwrap().to_string(), "2020-01");
    assert_eq!(civil_month(1_580_513_400), (2020, 1));
    assert_eq!(civil_month(1_580_515_200), (2020, 2));
}
