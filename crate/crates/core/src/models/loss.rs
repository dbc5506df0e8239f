//! Base recommendation loss on implicit feedback.

use super::{Gradients, ModelKind, ModelParams};
use crate::dataset::Batch;
use crate::error::{Error, Result};
use crate::math::{sigmoid, softplus};

/// Mean base-model loss over a batch; accumulates `weight * ∂loss/∂θ`.
///
/// BPR: mean over (positive, negative) pairs of `-log σ(s⁺ - s⁻)`.
/// NeuMF: mean binary cross-entropy of `σ(s)` with label 1 for positives and
/// 0 for negatives.
pub fn base_loss(params: &ModelParams, batch: &Batch, weight: f64, grads: &mut Gradients) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("batch has no positives"));
    }
    let side = batch.side;
    match params.kind {
        ModelKind::Bpr => {
            let pairs: usize = batch
                .positives
                .iter()
                .zip(&batch.negatives)
                .map(|(p, n)| if p.is_empty() { 0 } else { p.len() * (n.len() / p.len()) })
                .sum();
            if pairs == 0 {
                return Err(Error::EmptyInput("batch has no (positive, negative) pairs"));
            }
            let scale = weight / pairs as f64;
            let mut total = 0.0;
            for ((&a, pos), neg) in batch.anchors.iter().zip(&batch.positives).zip(&batch.negatives) {
                if pos.is_empty() {
                    continue;
                }
                let ratio = neg.len() / pos.len();
                for (j, &p) in pos.iter().enumerate() {
                    let sp = params.score_side(side, a, p);
                    for &n in &neg[j * ratio..(j + 1) * ratio] {
                        let x = sp - params.score_side(side, a, n);
                        total += softplus(-x);
                        // d/dx softplus(-x) = -σ(-x)
                        let dx = -sigmoid(-x) * scale;
                        params.backprop_score_side(side, a, p, dx, grads);
                        params.backprop_score_side(side, a, n, -dx, grads);
                    }
                }
            }
            Ok(total / pairs as f64)
        }
        ModelKind::NeuMf => {
            let count: usize = batch.positives.iter().chain(&batch.negatives).map(|v| v.len()).sum();
            let scale = weight / count as f64;
            let mut total = 0.0;
            for ((&a, pos), neg) in batch.anchors.iter().zip(&batch.positives).zip(&batch.negatives) {
                for &p in pos {
                    let s = params.score_side(side, a, p);
                    total += softplus(-s);
                    params.backprop_score_side(side, a, p, -sigmoid(-s) * scale, grads);
                }
                for &n in neg {
                    let s = params.score_side(side, a, n);
                    total += softplus(s);
                    params.backprop_score_side(side, a, n, sigmoid(s) * scale, grads);
                }
            }
            Ok(total / count as f64)
        }
    }
}
