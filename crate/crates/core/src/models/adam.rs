//! Adam with bias correction and an L2 penalty `λ·θ` folded into the
//! gradient. Only rows that carry a gradient are updated (lazy/sparse Adam):
//! an untouched embedding row keeps its value and its moments.

use alloc::format;
use alloc::vec::Vec;

use super::{Gradients, ModelParams};
use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub l2: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, l2: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &ModelParams, config: AdamConfig) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors.iter().map(|t| alloc::vec![0.0; t.data.len()]).collect();
        Self { config, step: 0, m: zeros.clone(), v: zeros }
    }

    /// Applies one update. Gradients are validated before anything is
    /// written, so a rejected step leaves both parameters and moments intact.
    pub fn step(&mut self, params: &mut ModelParams, grads: &Gradients) -> Result<()> {
        if grads.num_tensors() != params.tensors.len() || self.m.len() != params.tensors.len() {
            return Err(Error::DimensionMismatch("gradients/optimizer state do not match parameters".into()));
        }
        for (t, tensor) in params.tensors.iter().enumerate() {
            for &r in grads.touched_rows(t) {
                if grads.row(t, r).iter().any(|g| !g.is_finite()) {
                    return Err(Error::NonFinite(format!("gradient of {}", tensor.name)));
                }
            }
        }

        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps, l2 } = self.config;
        let bc1 = 1.0 - libm::pow(beta1, self.step as f64);
        let bc2 = 1.0 - libm::pow(beta2, self.step as f64);
        for (t, tensor) in params.tensors.iter_mut().enumerate() {
            let cols = tensor.cols;
            let m = &mut self.m[t];
            let v = &mut self.v[t];
            for &r in grads.touched_rows(t) {
                let g_row = grads.row(t, r);
                for c in 0..cols {
                    let k = r * cols + c;
                    let g = g_row[c] + l2 * tensor.data[k];
                    m[k] = beta1 * m[k] + (1.0 - beta1) * g;
                    v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
                    let m_hat = m[k] / bc1;
                    let v_hat = v[k] / bc2;
                    tensor.data[k] -= lr * m_hat / (math::sqrt(v_hat) + eps);
                }
            }
            if grads.touched_rows(t).iter().any(|&r| tensor.row(r).iter().any(|x| !x.is_finite())) {
                return Err(Error::NonFinite(format!("parameter {} after step {}", tensor.name, self.step)));
            }
        }
        Ok(())
    }
}
