//! Listwise distillation losses and their gradients with respect to the
//! student's parameters.

use alloc::vec::Vec;

use super::relaxed::relaxed_log_prob_with_grad;
use super::sampler::CorrectionSet;
use super::targets::RrdTargets;
use crate::dataset::Side;
use crate::error::{Error, Result};
use crate::models::{Gradients, ModelParams};

/// `−log p(head | S)` for one anchor, with `head` ordered and `tail`
/// unordered. Accumulates `scale · ∂/∂θ` into `grads`.
pub fn listwise_term(
    student: &ModelParams,
    side: Side,
    anchor: usize,
    head: &[usize],
    tail: &[usize],
    scale: f64,
    grads: &mut Gradients,
) -> Result<f64> {
    let head_scores: Vec<f64> = head.iter().map(|&c| student.score_side(side, anchor, c)).collect();
    let tail_scores: Vec<f64> = tail.iter().map(|&c| student.score_side(side, anchor, c)).collect();
    let g = relaxed_log_prob_with_grad(&head_scores, &tail_scores)?;
    if scale != 0.0 {
        for (&c, &d) in head.iter().zip(&g.head) {
            student.backprop_score_side(side, anchor, c, -scale * d, grads);
        }
        for (&c, &d) in tail.iter().zip(&g.tail) {
            student.backprop_score_side(side, anchor, c, -scale * d, grads);
        }
    }
    Ok(-g.log_prob)
}

/// Ranking-distillation loss: mean over `anchors` of `−log p(π | S)` against
/// the static teacher targets. Anchors with an empty head are skipped.
pub fn rrd_loss(
    student: &ModelParams,
    targets: &RrdTargets,
    anchors: &[usize],
    weight: f64,
    grads: &mut Gradients,
) -> Result<f64> {
    if anchors.is_empty() {
        return Err(Error::EmptyInput("distillation batch"));
    }
    let active: Vec<usize> =
        anchors.iter().copied().filter(|&a| targets.get(a).is_some_and(|t| !t.interesting.is_empty())).collect();
    if active.is_empty() {
        return Ok(0.0);
    }
    let count = active.len() as f64;
    let scale = weight / count;
    let mut total = 0.0;
    for a in active {
        let t = &targets.targets[a];
        total += listwise_term(student, targets.side, a, &t.interesting, &t.uninteresting, scale, grads)?;
    }
    Ok(total / count)
}

/// Correction loss over the anchors of one side: the head is the
/// underestimated set in teacher order, the tail the overestimated set.
/// Anchors without underestimated candidates contribute nothing and are left
/// out of the mean.
pub fn correction_loss(
    student: &ModelParams,
    samples: &CorrectionSet,
    anchors: &[usize],
    weight: f64,
    grads: &mut Gradients,
) -> Result<f64> {
    let active: Vec<usize> =
        anchors.iter().copied().filter(|&a| samples.get(a).is_some_and(|s| !s.under.is_empty())).collect();
    if active.is_empty() {
        return Ok(0.0);
    }
    let count = active.len() as f64;
    let scale = weight / count;
    let mut total = 0.0;
    for a in active {
        let s = samples.get(a).expect("filtered");
        total += listwise_term(student, samples.side, a, &s.under, &s.over, scale, grads)?;
    }
    Ok(total / count)
}

/// User-side correction loss over a batch of users.
pub fn ucd_loss(
    student: &ModelParams,
    samples: &CorrectionSet,
    users: &[usize],
    weight: f64,
    grads: &mut Gradients,
) -> Result<f64> {
    debug_assert_eq!(samples.side, Side::User);
    correction_loss(student, samples, users, weight, grads)
}

/// Item-side correction loss over the batch's items.
pub fn icd_loss(
    student: &ModelParams,
    samples: &CorrectionSet,
    items: &[usize],
    weight: f64,
    grads: &mut Gradients,
) -> Result<f64> {
    debug_assert_eq!(samples.side, Side::Item);
    correction_loss(student, samples, items, weight, grads)
}
