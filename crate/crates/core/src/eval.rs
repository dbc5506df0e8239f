//! Leave-one-out evaluation: hit ratio and truncated reciprocal rank, the
//! teacher/student rank-discrepancy diagnostic, and a paired t-test for
//! comparing two methods user by user.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::dataset::{Holdout, InteractionDataset, Side};
use crate::error::{Error, Result};
use crate::math::{exp, ln, sqrt};
use crate::models::ModelParams;
use crate::ranking::by_score_then_id;

/// 1 if the target sits in the top `n` (rank 0 is best).
#[inline]
pub fn hit_at_n(rank: usize, n: usize) -> f64 {
    if rank < n {
        1.0
    } else {
        0.0
    }
}

/// `1 / (rank + 1)` inside the top `n`, otherwise 0.
#[inline]
pub fn mrr_at_n(rank: usize, n: usize) -> f64 {
    if rank < n {
        1.0 / (rank + 1) as f64
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Hit(usize),
    Mrr(usize),
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Hit(n) => write!(f, "H@{n}"),
            Metric::Mrr(n) => write!(f, "M@{n}"),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(alloc::format!("unknown metric `{s}` (expected H@N or M@N)"));
        let (kind, n) = s.split_once('@').ok_or_else(bad)?;
        let n: usize = n.parse().map_err(|_| bad())?;
        if n == 0 {
            return Err(bad());
        }
        match kind {
            "H" => Ok(Metric::Hit(n)),
            "M" => Ok(Metric::Mrr(n)),
            _ => Err(bad()),
        }
    }
}

/// Rank of `target` among the candidates of `scores` not excluded by
/// `excluded`, with the same tie rule as every other ranking in the crate.
pub fn target_rank(scores: &[f64], target: usize, excluded: impl Fn(usize) -> bool) -> usize {
    let key = (target, scores[target]);
    (0..scores.len())
        .filter(|&c| c != target && !excluded(c))
        .filter(|&c| by_score_then_id((c, scores[c]), key).is_lt())
        .count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserMetrics {
    pub user: usize,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub ns: Vec<usize>,
    pub per_user: Vec<UserMetrics>,
}

impl MetricReport {
    pub fn metrics(&self) -> Vec<Metric> {
        self.ns.iter().flat_map(|&n| [Metric::Hit(n), Metric::Mrr(n)]).collect()
    }

    /// Per-user values of `metric`, in user order.
    pub fn values(&self, metric: Metric) -> Vec<f64> {
        self.per_user
            .iter()
            .map(|m| match metric {
                Metric::Hit(n) => hit_at_n(m.rank, n),
                Metric::Mrr(n) => mrr_at_n(m.rank, n),
            })
            .collect()
    }

    /// Arithmetic mean over users.
    pub fn mean(&self, metric: Metric) -> f64 {
        let v = self.values(metric);
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    }

    pub fn users(&self) -> Vec<usize> {
        self.per_user.iter().map(|m| m.user).collect()
    }
}

/// Ranks each user's held-out item against every item the user has not
/// interacted with. Training items and the user's other held-out item are
/// excluded from the candidate set.
pub fn evaluate(
    params: &ModelParams,
    dataset: &InteractionDataset,
    which: Holdout,
    ns: &[usize],
) -> Result<MetricReport> {
    if ns.is_empty() || ns.contains(&0) {
        return Err(Error::InvalidConfig("metric cutoffs must be positive".into()));
    }
    params.check_dims(dataset.num_users(), dataset.num_items())?;
    let other = match which {
        Holdout::Valid => Holdout::Test,
        Holdout::Test => Holdout::Valid,
    };
    let mut per_user = Vec::new();
    for (u, target) in dataset.held_out_pairs(which) {
        let scores = params.score_all(Side::User, u);
        let skip = dataset.held_out(u, other);
        let rank = target_rank(&scores, target, |c| Some(c) == skip || dataset.is_train(u, c));
        per_user.push(UserMetrics { user: u, rank });
    }
    if per_user.is_empty() {
        return Err(Error::EmptyInput("no users with held-out items"));
    }
    Ok(MetricReport { ns: ns.to_vec(), per_user })
}

/// Full ranks (0 = best) of every unobserved counterpart; `usize::MAX` for
/// observed ones.
fn full_ranks(
    params: &ModelParams,
    dataset: &InteractionDataset,
    side: Side,
    anchor: usize,
) -> (Vec<usize>, Vec<usize>) {
    let scores = params.score_all(side, anchor);
    let mut cands: Vec<(usize, f64)> =
        dataset.unobserved_counterparts(side, anchor).into_iter().map(|c| (c, scores[c])).collect();
    cands.sort_by(|a, b| by_score_then_id(*a, *b));
    let mut ranks = alloc::vec![usize::MAX; scores.len()];
    for (r, &(c, _)) in cands.iter().enumerate() {
        ranks[c] = r;
    }
    (cands.into_iter().map(|(c, _)| c).collect(), ranks)
}

/// Mean absolute rank gap between student and teacher over the teacher's
/// top-`k` candidates of each anchor, averaged over all anchors on `side`.
/// Both rankings cover every unobserved counterpart.
pub fn avg_rank_discrepancy(
    teacher: &ModelParams,
    student: &ModelParams,
    dataset: &InteractionDataset,
    side: Side,
    k: usize,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidConfig("discrepancy cutoff must be positive".into()));
    }
    teacher.check_dims(dataset.num_users(), dataset.num_items())?;
    student.check_dims(dataset.num_users(), dataset.num_items())?;
    let mut sum = 0.0;
    let mut anchors = 0usize;
    for a in 0..dataset.num_anchors(side) {
        let (teacher_order, _) = full_ranks(teacher, dataset, side, a);
        if teacher_order.is_empty() {
            continue;
        }
        let (_, student_ranks) = full_ranks(student, dataset, side, a);
        let head = &teacher_order[..k.min(teacher_order.len())];
        let gap: usize = head.iter().enumerate().map(|(rt, &c)| student_ranks[c].abs_diff(rt)).sum();
        sum += gap as f64 / head.len() as f64;
        anchors += 1;
    }
    if anchors == 0 {
        return Err(Error::EmptyInput("no anchors with unobserved candidates"));
    }
    Ok(sum / anchors as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTTest {
    pub mean_diff: f64,
    pub t: f64,
    pub df: usize,
    /// Two-sided p-value.
    pub p_value: f64,
}

/// Two-sided paired t-test on `a[k] - b[k]`. Zero variance gives `t = 0,
/// p = 1` for a zero mean difference and `t = ±∞, p = 0` otherwise.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<PairedTTest> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(alloc::format!("paired samples of length {} and {}", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::TooFewObservations { needed: 2, got: n });
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;
    let df = n - 1;
    let t = if var == 0.0 {
        if mean == 0.0 {
            0.0
        } else {
            mean.signum() * f64::INFINITY
        }
    } else {
        mean / sqrt(var / n as f64)
    };
    Ok(PairedTTest { mean_diff: mean, t, df, p_value: student_t_two_sided_p(t, df as f64) })
}

/// `P(|T| ≥ |t|)` for Student's t with `df` degrees of freedom, via the
/// regularized incomplete beta function `I_{df/(df+t²)}(df/2, 1/2)`.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let log_front = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b) + a * ln(x) + b * libm::log1p(-x);
    let front = exp(log_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

// Lentz's method for the continued fraction of I_x(a, b).
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let guard = |v: f64| if v.abs() < TINY { TINY } else { v };
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 / guard(1.0 - qab * x / qap);
    let mut h = d;
    for m in 1..=500 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 / guard(1.0 + aa * d);
        c = guard(1.0 + aa / c);
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 / guard(1.0 + aa * d);
        c = guard(1.0 + aa / c);
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Header-style label list for a report, e.g. `["H@5", "M@5", ...]`.
pub fn metric_labels(ns: &[usize]) -> Vec<String> {
    ns.iter().flat_map(|&n| [alloc::format!("H@{n}"), alloc::format!("M@{n}")]).collect()
}
