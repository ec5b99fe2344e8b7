//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use dialign::embedding::sgns_gradient;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;

/// Independent loss: `-ln σ(u·v) - Σ ln σ(-n·v)` written out directly.
fn loss(center: &[f64], context: &[f64], negatives: &[Vec<f64>]) -> f64 {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let ln_sig = |x: f64| -(1.0 + (-x).exp()).ln();
    -ln_sig(dot(context, center)) - negatives.iter().map(|n| ln_sig(-dot(n, center))).sum::<f64>()
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn central(f: impl Fn(f64) -> f64) -> f64 {
    (f(H) - f(-H)) / (2.0 * H)
}

/// Max relative error of every analytic gradient entry against central
/// differences of [`loss`].
pub fn gradient_check_error(rng: &mut ChaCha8Rng, dim: usize, negs: usize) -> f64 {
    let mut vec = || (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
    let center = vec();
    let context = vec();
    let negatives: Vec<Vec<f64>> = (0..negs).map(|_| vec()).collect();
    let refs: Vec<&[f64]> = negatives.iter().map(Vec::as_slice).collect();
    let g = sgns_gradient(&center, &context, &refs);
    assert!((g.loss - loss(&center, &context, &negatives)).abs() < 1e-12);

    let mut worst: f64 = 0.0;
    for k in 0..dim {
        let num = central(|h| {
            let mut c = center.clone();
            c[k] += h;
            loss(&c, &context, &negatives)
        });
        worst = worst.max(rel_err(g.center[k], num));
        let num = central(|h| {
            let mut o = context.clone();
            o[k] += h;
            loss(&center, &o, &negatives)
        });
        worst = worst.max(rel_err(g.context[k], num));
        for (j, grad) in g.negatives.iter().enumerate() {
            let num = central(|h| {
                let mut n = negatives.clone();
                n[j][k] += h;
                loss(&center, &context, &n)
            });
            worst = worst.max(rel_err(grad[k], num));
        }
    }
    worst
}

/// Orthogonal matrix from the QR factorization of a uniform random matrix,
/// with column signs fixed so `R` has a positive diagonal.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, d: usize) -> nalgebra::DMatrix<f64> {
    let a = nalgebra::DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
    let qr = a.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

/// `‖XW − Y‖_F`.
pub fn residual(x: &nalgebra::DMatrix<f64>, w: &nalgebra::DMatrix<f64>, y: &nalgebra::DMatrix<f64>) -> f64 {
    (x * w - y).norm()
}

/// `max |WᵀW − I|`.
pub fn orthogonality(w: &nalgebra::DMatrix<f64>) -> f64 {
    let d = w.ncols();
    (w.transpose() * w - nalgebra::DMatrix::<f64>::identity(d, d)).amax()
}

/// UTC (year, month) of a Unix timestamp via the civil-from-days algorithm.
pub fn civil_month(ts: i64) -> (i32, u32) {
    let z = ts.div_euclid(86_400) + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let m = if mp < 10 { mp + 3 } else { mp - 9 };
    let y = yoe + era * 400 + i64::from(m <= 2);
    (y as i32, m as u32)
}

/// Month → (uploads, mean disagreement over defined videos), brute force.
pub fn monthly_oracle(
    videos: &[dialign::ingest::VideoRecord],
    channel: &str,
    min_videos: usize,
) -> std::collections::BTreeMap<(i32, u32), (usize, f64)> {
    let mut months: std::collections::BTreeMap<(i32, u32), Vec<Option<f64>>> = Default::default();
    for v in videos.iter().filter(|v| v.channel_id == channel) {
        let total = v.like_count + v.dislike_count;
        let d = (total > 0).then(|| v.dislike_count as f64 / total as f64);
        months.entry(civil_month(v.uploaded_at)).or_default().push(d);
    }
    months
        .into_iter()
        .filter_map(|(m, ds)| {
            let defined: Vec<f64> = ds.iter().flatten().copied().collect();
            if ds.len() < min_videos || defined.is_empty() {
                return None;
            }
            Some((m, (ds.len(), defined.iter().sum::<f64>() / defined.len() as f64)))
        })
        .collect()
}

/// Category counts in `ShareCategory::ALL` order, by a second reading of the
/// rules: sole users first, then majority side, then ties.
pub fn share_oracle(comments: &[dialign::ingest::CommentRecord], a: &str, b: &str, year: i32) -> [usize; 7] {
    let in_year = |c: &&dialign::ingest::CommentRecord| {
        civil_month(c.posted_at).0 == year && (c.channel_id == a || c.channel_id == b)
    };
    let mut out = [0; 7];
    for c in comments.iter().filter(in_year) {
        let mine = comments.iter().filter(in_year).filter(|o| o.user_id == c.user_id);
        let u_a = mine.clone().filter(|o| o.channel_id == a).count();
        let u_b = mine.filter(|o| o.channel_id == b).count();
        let on_a = c.channel_id == a;
        let slot = if u_b == 0 {
            0
        } else if u_a == 0 {
            1
        } else if u_a == u_b {
            6
        } else if u_a > u_b {
            if on_a {
                2
            } else {
                3
            }
        } else if on_a {
            4
        } else {
            5
        };
        out[slot] += 1;
    }
    out
}
