//! Ranking lists over candidate pools.
//!
//! Ranks are 0-based (0 is the best position). Candidates are ordered by
//! descending score with ties broken by ascending id, so every ranking is
//! total and reproducible.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::seq::index;
use rand::Rng;

use crate::dataset::{InteractionDataset, Side};
use crate::error::{Error, Result};
use crate::models::ModelParams;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RankingList {
    pub anchor: usize,
    pub side: Side,
    order: Vec<usize>,
    rank_of: BTreeMap<usize, usize>,
}

impl RankingList {
    /// Builds a ranking from (candidate, score) pairs.
    pub fn from_scores(anchor: usize, side: Side, scored: &[(usize, f64)]) -> Result<Self> {
        if scored.is_empty() {
            return Err(Error::EmptyInput("candidate pool"));
        }
        let mut sorted = scored.to_vec();
        sorted.sort_by(|a, b| by_score_then_id(*a, *b));
        let order: Vec<usize> = sorted.iter().map(|&(c, _)| c).collect();
        let rank_of = order.iter().enumerate().map(|(r, &c)| (c, r)).collect();
        Ok(Self { anchor, side, order, rank_of })
    }

    /// Candidates, best first.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn rank_of(&self, candidate: usize) -> Option<usize> {
        self.rank_of.get(&candidate).copied()
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn top(&self, n: usize) -> &[usize] {
        &self.order[..n.min(self.order.len())]
    }

    /// Same candidate set as `other`.
    pub fn same_candidates(&self, other: &RankingList) -> bool {
        self.rank_of.len() == other.rank_of.len() && self.rank_of.keys().eq(other.rank_of.keys())
    }
}

/// Descending score, ascending id on ties.
#[inline]
pub fn by_score_then_id(a: (usize, f64), b: (usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// A bounded set of unobserved counterparts for one anchor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidatePool {
    pub anchor: usize,
    pub side: Side,
    /// Ascending, no duplicates.
    pub candidates: Vec<usize>,
}

impl CandidatePool {
    /// Every unobserved counterpart of the anchor.
    pub fn exhaustive(dataset: &InteractionDataset, side: Side, anchor: usize) -> Self {
        Self { anchor, side, candidates: dataset.unobserved_counterparts(side, anchor) }
    }
}

/// Sizes of the three parts of a candidate pool. A size at least as large as
/// the catalog means "everything".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PoolConfig {
    pub teacher_top: usize,
    pub student_top: usize,
    pub random: usize,
}

impl Default for PoolConfig {
    fn default() -> Self {
        Self { teacher_top: 100, student_top: 100, random: 100 }
    }
}

/// Scores every candidate of `pool` and ranks them.
pub fn rank_candidates(params: &ModelParams, pool: &CandidatePool) -> Result<RankingList> {
    let scored: Vec<(usize, f64)> =
        pool.candidates.iter().map(|&c| (c, params.score_side(pool.side, pool.anchor, c))).collect();
    RankingList::from_scores(pool.anchor, pool.side, &scored)
}

/// Top `n` unobserved counterparts of an anchor under `scores` (indexed by
/// counterpart id).
pub fn top_unobserved(dataset: &InteractionDataset, side: Side, anchor: usize, scores: &[f64], n: usize) -> Vec<usize> {
    let mut scored: Vec<(usize, f64)> =
        dataset.unobserved_counterparts(side, anchor).into_iter().map(|c| (c, scores[c])).collect();
    if n < scored.len() {
        scored.select_nth_unstable_by(n, |a, b| by_score_then_id(*a, *b));
        scored.truncate(n);
    }
    scored.sort_by(|a, b| by_score_then_id(*a, *b));
    scored.into_iter().map(|(c, _)| c).collect()
}

/// Exhaustive top-N unobserved items for `user`; shorter if fewer exist.
pub fn top_n(params: &ModelParams, dataset: &InteractionDataset, user: usize, n: usize) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::InvalidConfig("N must be at least 1".into()));
    }
    if user >= dataset.num_users() {
        return Err(Error::IdOutOfRange { kind: "user", id: user, count: dataset.num_users() });
    }
    params.check_dims(dataset.num_users(), dataset.num_items())?;
    let scores = params.score_all(Side::User, user);
    Ok(top_unobserved(dataset, Side::User, user, &scores, n))
}

/// Union of the teacher's head, the student's head and a uniform sample of
/// the remaining unobserved counterparts.
pub fn build_pool<R: Rng + ?Sized>(
    dataset: &InteractionDataset,
    teacher: &ModelParams,
    student: &ModelParams,
    side: Side,
    anchor: usize,
    config: &PoolConfig,
    rng: &mut R,
) -> CandidatePool {
    let teacher_head = {
        let scores = teacher.score_all(side, anchor);
        top_unobserved(dataset, side, anchor, &scores, config.teacher_top)
    };
    build_pool_with_teacher_head(dataset, &teacher_head, student, side, anchor, config, rng)
}

/// [`build_pool`] with the teacher's head precomputed; the teacher never
/// changes during distillation.
pub fn build_pool_with_teacher_head<R: Rng + ?Sized>(
    dataset: &InteractionDataset,
    teacher_head: &[usize],
    student: &ModelParams,
    side: Side,
    anchor: usize,
    config: &PoolConfig,
    rng: &mut R,
) -> CandidatePool {
    let mut set: BTreeSet<usize> = teacher_head.iter().take(config.teacher_top).copied().collect();
    if config.student_top > 0 {
        let scores = student.score_all(side, anchor);
        set.extend(top_unobserved(dataset, side, anchor, &scores, config.student_top));
    }
    if config.random > 0 {
        let rest: Vec<usize> =
            dataset.unobserved_counterparts(side, anchor).into_iter().filter(|c| !set.contains(c)).collect();
        let take = config.random.min(rest.len());
        let picked: Vec<usize> = index::sample(rng, rest.len(), take).into_iter().map(|k| rest[k]).collect();
        set.extend(picked);
    }
    CandidatePool { anchor, side, candidates: set.into_iter().collect() }
}
