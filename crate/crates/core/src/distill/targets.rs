//! Static ranking-distillation targets taken from the teacher.

use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;

use crate::dataset::{InteractionDataset, Side};
use crate::error::Result;
use crate::models::ModelParams;
use crate::ranking::top_unobserved;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RrdConfig {
    /// Size of the ordered head taken from the top of the teacher ranking.
    pub interesting: usize,
    /// Number of tail candidates sampled uniformly from the rest.
    pub uninteresting: usize,
    /// Use the entire remainder as the tail instead of sampling.
    pub exhaustive_tail: bool,
}

impl Default for RrdConfig {
    fn default() -> Self {
        Self { interesting: 40, uninteresting: 40, exhaustive_tail: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RrdTarget {
    pub anchor: usize,
    /// Teacher's top candidates, best first.
    pub interesting: Vec<usize>,
    /// Sampled lower-ranked candidates, in teacher order.
    pub uninteresting: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RrdTargets {
    pub side: Side,
    /// Indexed by anchor.
    pub targets: Vec<RrdTarget>,
}

impl RrdTargets {
    pub fn get(&self, anchor: usize) -> Option<&RrdTarget> {
        self.targets.get(anchor)
    }

    pub fn fingerprint(&self) -> u64 {
        crate::fingerprint::fingerprint(self)
    }
}

/// Builds targets for every anchor on `side` from the teacher's full ranking
/// of unobserved counterparts.
pub fn build_rrd_targets<R: Rng + ?Sized>(
    teacher: &ModelParams,
    dataset: &InteractionDataset,
    side: Side,
    config: &RrdConfig,
    rng: &mut R,
) -> Result<RrdTargets> {
    teacher.check_dims(dataset.num_users(), dataset.num_items())?;
    let targets = (0..dataset.num_anchors(side))
        .map(|anchor| {
            let scores = teacher.score_all(side, anchor);
            let ranked = top_unobserved(dataset, side, anchor, &scores, usize::MAX);
            let split = config.interesting.min(ranked.len());
            let (head, rest) = ranked.split_at(split);
            let uninteresting = if config.exhaustive_tail || rest.len() <= config.uninteresting {
                rest.to_vec()
            } else {
                let mut picked = index::sample(rng, rest.len(), config.uninteresting).into_vec();
                picked.sort_unstable();
                picked.into_iter().map(|k| rest[k]).collect()
            };
            RrdTarget { anchor, interesting: head.to_vec(), uninteresting }
        })
        .collect();
    Ok(RrdTargets { side, targets })
}
