//! Discrepancy-driven selection of correction sets.
//!
//! For each anchor the teacher and student rank the same candidate pool.
//! Candidates the student underestimates are drawn with probability
//! proportional to their underestimation error, likewise for
//! overestimation. Draws are without replacement and zero-weight candidates
//! are never selected.

use alloc::vec::Vec;

use rand::Rng;

use super::discrepancy::{discrepancy_over, discrepancy_under};
use crate::dataset::Side;
use crate::error::{Error, Result};
use crate::ranking::RankingList;

/// How correction candidates are chosen from their discrepancy weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SelectionRule {
    /// Sequential weighted draws without replacement.
    #[default]
    Sampled,
    /// The largest weights, ties by ascending candidate id.
    Deterministic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorrectionBudget {
    pub under: usize,
    pub over: usize,
}

impl Default for CorrectionBudget {
    fn default() -> Self {
        Self { under: 40, over: 40 }
    }
}

/// Correction set of one anchor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CorrectionSample {
    pub anchor: usize,
    pub side: Side,
    /// Underestimated candidates in ascending teacher rank.
    pub under: Vec<usize>,
    /// Teacher ranks of `under`, position by position.
    pub under_teacher_ranks: Vec<usize>,
    /// Overestimated candidates, in draw order.
    pub over: Vec<usize>,
    /// Epoch at which the sample was drawn.
    pub epoch: usize,
}

impl CorrectionSample {
    pub fn is_empty(&self) -> bool {
        self.under.is_empty() && self.over.is_empty()
    }
}

/// Correction samples for every anchor on one side, from a single
/// resampling round.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CorrectionSet {
    pub side: Side,
    pub epoch: usize,
    /// Indexed by anchor; `None` for anchors that were not sampled.
    pub samples: Vec<Option<CorrectionSample>>,
}

impl CorrectionSet {
    pub fn empty(side: Side, num_anchors: usize) -> Self {
        Self { side, epoch: 0, samples: alloc::vec![None; num_anchors] }
    }

    pub fn get(&self, anchor: usize) -> Option<&CorrectionSample> {
        self.samples.get(anchor).and_then(Option::as_ref)
    }
}

/// Indices drawn one at a time with probability proportional to the
/// remaining weights, each removed after it is drawn. When at most `m`
/// weights are positive all of them are returned in index order.
pub fn weighted_sample_without_replacement<R: Rng + ?Sized>(weights: &[f64], m: usize, rng: &mut R) -> Vec<usize> {
    let positive: Vec<usize> = (0..weights.len()).filter(|&k| weights[k] > 0.0).collect();
    if positive.len() <= m {
        return positive;
    }
    let mut remaining: Vec<f64> = weights.iter().map(|&w| if w > 0.0 { w } else { 0.0 }).collect();
    let mut picked = Vec::with_capacity(m);
    for _ in 0..m {
        let total: f64 = remaining.iter().sum();
        let target = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut choice = None;
        for (k, &w) in remaining.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            acc += w;
            choice = Some(k);
            if target < acc {
                break;
            }
        }
        // rounding can leave `target` just past the final cumulative sum; the
        // last positive weight is the right pick then
        let k = choice.expect("positive weight remains");
        picked.push(k);
        remaining[k] = 0.0;
    }
    picked
}

/// The `m` largest positive weights, ties broken by ascending index.
pub fn top_by_weight(weights: &[f64], m: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..weights.len()).filter(|&k| weights[k] > 0.0).collect();
    idx.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    idx.truncate(m);
    idx
}

/// Draws the under- and overestimated sets of one anchor.
pub fn sample_correction<R: Rng + ?Sized>(
    teacher: &RankingList,
    student: &RankingList,
    mu: f64,
    budget: CorrectionBudget,
    rule: SelectionRule,
    epoch: usize,
    rng: &mut R,
) -> Result<CorrectionSample> {
    if teacher.anchor != student.anchor || teacher.side != student.side || !teacher.same_candidates(student) {
        return Err(Error::InvalidConfig("teacher and student lists must rank the same pool".into()));
    }
    // candidates in teacher order; index k has teacher rank k
    let candidates = teacher.order();
    let mut under_w = Vec::with_capacity(candidates.len());
    let mut over_w = Vec::with_capacity(candidates.len());
    for (rank_t, &c) in candidates.iter().enumerate() {
        let rank_s = student.rank_of(c).expect("same candidate set");
        under_w.push(discrepancy_under(rank_s, rank_t, mu));
        over_w.push(discrepancy_over(rank_s, rank_t, mu));
    }
    let (mut under_idx, over_idx) = match rule {
        SelectionRule::Sampled => (
            weighted_sample_without_replacement(&under_w, budget.under, rng),
            weighted_sample_without_replacement(&over_w, budget.over, rng),
        ),
        SelectionRule::Deterministic => (top_by_weight(&under_w, budget.under), top_by_weight(&over_w, budget.over)),
    };
    under_idx.sort_unstable();
    Ok(CorrectionSample {
        anchor: teacher.anchor,
        side: teacher.side,
        under: under_idx.iter().map(|&k| candidates[k]).collect(),
        under_teacher_ranks: under_idx,
        over: over_idx.iter().map(|&k| candidates[k]).collect(),
        epoch,
    })
}
