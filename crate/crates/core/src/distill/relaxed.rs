//! Relaxed permutation log-likelihood.
//!
//! For head scores `s_1..s_n` (in target order) and tail scores `t_j`:
//!
//! ```text
//! log p = Σ_k [ s_k − log( Σ_{i≥k} exp s_i + Σ_j exp t_j ) ]
//! ```
//!
//! The head is ordered exactly while the tail only has to sit below it. Each
//! per-factor log-denominator is accumulated as a running log-sum-exp from
//! the end of the head, so every factor is max-stabilized and the whole
//! evaluation is O(|head| + |tail|).

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{exp, log_add_exp, log_sum_exp};

fn check_finite(scores: &[f64]) -> Result<()> {
    if scores.iter().all(|s| s.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("ranking score".into()))
    }
}

/// Log-denominators `lse_k = log(Σ_{i≥k} exp s_i + Σ_j exp t_j)`.
fn log_denominators(head: &[f64], tail: &[f64]) -> Vec<f64> {
    let mut lse = alloc::vec![0.0; head.len()];
    let mut acc = log_sum_exp(tail);
    for k in (0..head.len()).rev() {
        acc = log_add_exp(head[k], acc);
        lse[k] = acc;
    }
    lse
}

pub fn relaxed_log_prob(head: &[f64], tail: &[f64]) -> Result<f64> {
    if head.is_empty() {
        return Err(Error::EmptyInput("relaxed permutation head"));
    }
    check_finite(head)?;
    check_finite(tail)?;
    let lse = log_denominators(head, tail);
    Ok(head.iter().zip(&lse).map(|(s, l)| s - l).sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedGrad {
    pub log_prob: f64,
    /// ∂ log p / ∂ s_k
    pub head: Vec<f64>,
    /// ∂ log p / ∂ t_j
    pub tail: Vec<f64>,
}

/// Log-likelihood with its gradient.
///
/// ∂/∂s_i = 1 − Σ_{k≤i} exp(s_i − lse_k) and ∂/∂t_j = −Σ_k exp(t_j − lse_k).
pub fn relaxed_log_prob_with_grad(head: &[f64], tail: &[f64]) -> Result<RelaxedGrad> {
    if head.is_empty() {
        return Err(Error::EmptyInput("relaxed permutation head"));
    }
    check_finite(head)?;
    check_finite(tail)?;
    let lse = log_denominators(head, tail);
    let log_prob = head.iter().zip(&lse).map(|(s, l)| s - l).sum();
    let dhead =
        head.iter().enumerate().map(|(i, &s)| 1.0 - lse[..=i].iter().map(|&l| exp(s - l)).sum::<f64>()).collect();
    let dtail = tail.iter().map(|&t| -lse.iter().map(|&l| exp(t - l)).sum::<f64>()).collect();
    Ok(RelaxedGrad { log_prob, head: dhead, tail: dtail })
}
