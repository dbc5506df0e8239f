//! Base scorers `S(u, i)`: BPR matrix factorization and NeuMF.
//!
//! Parameters are stored as named row-major tensors. Gradients mirror that
//! layout and remember which rows were written, so the optimizer only visits
//! rows that a batch actually touched.

mod adam;
mod loss;
mod neumf;

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;

use crate::dataset::Side;
use crate::error::{Error, Result};
use crate::math;

pub use adam::{AdamConfig, AdamState};
pub use loss::base_loss;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "lowercase"))]
pub enum ModelKind {
    Bpr,
    NeuMf,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Bpr => "bpr",
            ModelKind::NeuMf => "neumf",
        }
    }
}

impl core::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bpr" => Ok(ModelKind::Bpr),
            "neumf" => Ok(ModelKind::NeuMf),
            other => Err(Error::InvalidConfig(alloc::format!("unknown model kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(name: &str, rows: usize, cols: usize) -> Self {
        Self { name: name.to_string(), rows, cols, data: alloc::vec![0.0; rows * cols] }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

// tensor slots
pub(crate) const USER_EMB: usize = 0;
pub(crate) const ITEM_EMB: usize = 1;
pub(crate) const BPR_ITEM_BIAS: usize = 2;
pub(crate) const GMF_USER: usize = 2;
pub(crate) const GMF_ITEM: usize = 3;
pub(crate) const MLP_W1: usize = 4;
pub(crate) const MLP_B1: usize = 5;
pub(crate) const MLP_W2: usize = 6;
pub(crate) const MLP_B2: usize = 7;
pub(crate) const OUT_W: usize = 8;
pub(crate) const OUT_B: usize = 9;

/// Initialization settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitConfig {
    /// Standard deviation of the Gaussian embedding initialization.
    pub embedding_std: f64,
    /// Adds a learned per-item bias to BPR.
    pub item_bias: bool,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self { embedding_std: 0.01, item_bias: false }
    }
}

/// Learnable parameters of one scorer.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelParams {
    pub kind: ModelKind,
    pub num_users: usize,
    pub num_items: usize,
    pub dim: usize,
    pub tensors: Vec<Tensor>,
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box-Muller; 1 - U keeps the log argument in (0, 1]
    let u1 = 1.0 - rng.gen::<f64>();
    let u2 = rng.gen::<f64>();
    math::sqrt(-2.0 * math::ln(u1)) * libm::cos(2.0 * PI * u2)
}

fn fill_gaussian<R: Rng + ?Sized>(t: &mut Tensor, std: f64, rng: &mut R) {
    for x in &mut t.data {
        *x = std * gaussian(rng);
    }
}

fn fill_xavier<R: Rng + ?Sized>(t: &mut Tensor, fan_in: usize, fan_out: usize, rng: &mut R) {
    let bound = math::sqrt(6.0 / (fan_in + fan_out) as f64);
    for x in &mut t.data {
        *x = rng.gen_range(-bound..bound);
    }
}

/// Width of the last MLP layer of NeuMF.
pub(crate) fn neumf_last_width(dim: usize) -> usize {
    (dim / 2).max(1)
}

/// Fresh parameters: Gaussian embeddings, Xavier-uniform MLP weights, zero biases.
pub fn init_params<R: Rng + ?Sized>(
    kind: ModelKind,
    num_users: usize,
    num_items: usize,
    dim: usize,
    init: &InitConfig,
    rng: &mut R,
) -> Result<ModelParams> {
    if dim == 0 {
        return Err(Error::InvalidConfig("embedding dimension must be positive".into()));
    }
    if num_users == 0 || num_items == 0 {
        return Err(Error::InvalidConfig("model needs at least one user and one item".into()));
    }
    let std = init.embedding_std;
    let mut tensors = Vec::new();
    let mut user = Tensor::zeros("user_embeddings", num_users, dim);
    let mut item = Tensor::zeros("item_embeddings", num_items, dim);
    fill_gaussian(&mut user, std, rng);
    fill_gaussian(&mut item, std, rng);
    tensors.push(user);
    tensors.push(item);
    match kind {
        ModelKind::Bpr => {
            if init.item_bias {
                tensors.push(Tensor::zeros("item_bias", num_items, 1));
            }
        }
        ModelKind::NeuMf => {
            let h2 = neumf_last_width(dim);
            let mut gu = Tensor::zeros("gmf_user_embeddings", num_users, dim);
            let mut gi = Tensor::zeros("gmf_item_embeddings", num_items, dim);
            fill_gaussian(&mut gu, std, rng);
            fill_gaussian(&mut gi, std, rng);
            let mut w1 = Tensor::zeros("mlp_w1", dim, 2 * dim);
            fill_xavier(&mut w1, 2 * dim, dim, rng);
            let mut w2 = Tensor::zeros("mlp_w2", h2, dim);
            fill_xavier(&mut w2, dim, h2, rng);
            let mut out = Tensor::zeros("output_w", 1, dim + h2);
            fill_xavier(&mut out, dim + h2, 1, rng);
            tensors.extend([
                gu,
                gi,
                w1,
                Tensor::zeros("mlp_b1", 1, dim),
                w2,
                Tensor::zeros("mlp_b2", 1, h2),
                out,
                Tensor::zeros("output_b", 1, 1),
            ]);
        }
    }
    Ok(ModelParams { kind, num_users, num_items, dim, tensors })
}

impl ModelParams {
    pub fn num_parameters(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn has_item_bias(&self) -> bool {
        self.kind == ModelKind::Bpr && self.tensors.len() > BPR_ITEM_BIAS
    }

    /// Rejects parameters built for a different catalog.
    pub fn check_dims(&self, num_users: usize, num_items: usize) -> Result<()> {
        if self.num_users != num_users || self.num_items != num_items {
            return Err(Error::DimensionMismatch(alloc::format!(
                "model has {}x{} users x items, dataset has {}x{}",
                self.num_users,
                self.num_items,
                num_users,
                num_items
            )));
        }
        Ok(())
    }

    /// Shape consistency of every tensor with `kind`, `dim` and the counts.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim;
        let h2 = neumf_last_width(d);
        let expected: Vec<(usize, usize)> = match self.kind {
            ModelKind::Bpr => {
                let mut v = alloc::vec![(self.num_users, d), (self.num_items, d)];
                if self.tensors.len() == 3 {
                    v.push((self.num_items, 1));
                }
                v
            }
            ModelKind::NeuMf => alloc::vec![
                (self.num_users, d),
                (self.num_items, d),
                (self.num_users, d),
                (self.num_items, d),
                (d, 2 * d),
                (1, d),
                (h2, d),
                (1, h2),
                (1, d + h2),
                (1, 1),
            ],
        };
        if d == 0 || expected.len() != self.tensors.len() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{} model with dim {d} expects {} tensors, found {}",
                self.kind.as_str(),
                expected.len(),
                self.tensors.len()
            )));
        }
        for (t, (rows, cols)) in self.tensors.iter().zip(expected) {
            if t.rows != rows || t.cols != cols || t.data.len() != rows * cols {
                return Err(Error::DimensionMismatch(alloc::format!(
                    "tensor {} is {}x{} ({} values), expected {rows}x{cols}",
                    t.name,
                    t.rows,
                    t.cols,
                    t.data.len()
                )));
            }
        }
        Ok(())
    }

    fn check_ids(&self, user: usize, item: usize) -> Result<()> {
        if user >= self.num_users {
            return Err(Error::IdOutOfRange { kind: "user", id: user, count: self.num_users });
        }
        if item >= self.num_items {
            return Err(Error::IdOutOfRange { kind: "item", id: item, count: self.num_items });
        }
        Ok(())
    }

    pub fn score(&self, user: usize, item: usize) -> Result<f64> {
        self.check_ids(user, item)?;
        Ok(self.score_unchecked(user, item))
    }

    pub(crate) fn score_unchecked(&self, user: usize, item: usize) -> f64 {
        match self.kind {
            ModelKind::Bpr => {
                let mut s = math::dot(self.tensors[USER_EMB].row(user), self.tensors[ITEM_EMB].row(item));
                if self.has_item_bias() {
                    s += self.tensors[BPR_ITEM_BIAS].data[item];
                }
                s
            }
            ModelKind::NeuMf => neumf::forward(self, user, item).output,
        }
    }

    /// Score of the (anchor, candidate) pair read on `side`.
    #[inline]
    pub fn score_side(&self, side: Side, anchor: usize, candidate: usize) -> f64 {
        let (u, i) = pair(side, anchor, candidate);
        self.score_unchecked(u, i)
    }

    /// Scores of `anchor` against every counterpart, indexed by counterpart id.
    pub fn score_all(&self, side: Side, anchor: usize) -> Vec<f64> {
        match (self.kind, side) {
            (ModelKind::Bpr, Side::User) => {
                let u = self.tensors[USER_EMB].row(anchor);
                (0..self.num_items).map(|i| self.score_bpr_row(u, i)).collect()
            }
            (ModelKind::Bpr, Side::Item) => {
                let v = self.tensors[ITEM_EMB].row(anchor);
                let bias = if self.has_item_bias() { self.tensors[BPR_ITEM_BIAS].data[anchor] } else { 0.0 };
                (0..self.num_users).map(|u| math::dot(self.tensors[USER_EMB].row(u), v) + bias).collect()
            }
            (ModelKind::NeuMf, _) => neumf::score_all(self, side, anchor),
        }
    }

    #[inline]
    fn score_bpr_row(&self, user_vec: &[f64], item: usize) -> f64 {
        let mut s = math::dot(user_vec, self.tensors[ITEM_EMB].row(item));
        if self.has_item_bias() {
            s += self.tensors[BPR_ITEM_BIAS].data[item];
        }
        s
    }

    /// Accumulates `dscore * dS(u,i)/dθ` into `grads`.
    pub fn backprop_score(&self, user: usize, item: usize, dscore: f64, grads: &mut Gradients) {
        if dscore == 0.0 {
            return;
        }
        match self.kind {
            ModelKind::Bpr => {
                let d = self.dim;
                let u = self.tensors[USER_EMB].row(user);
                let v = self.tensors[ITEM_EMB].row(item);
                let gu = grads.row_mut(USER_EMB, user);
                for k in 0..d {
                    gu[k] += dscore * v[k];
                }
                let gv = grads.row_mut(ITEM_EMB, item);
                for k in 0..d {
                    gv[k] += dscore * u[k];
                }
                if self.has_item_bias() {
                    grads.row_mut(BPR_ITEM_BIAS, item)[0] += dscore;
                }
            }
            ModelKind::NeuMf => neumf::backward(self, user, item, dscore, grads),
        }
    }

    #[inline]
    pub fn backprop_score_side(&self, side: Side, anchor: usize, candidate: usize, dscore: f64, grads: &mut Gradients) {
        let (u, i) = pair(side, anchor, candidate);
        self.backprop_score(u, i, dscore, grads);
    }

    /// Distance of the pair's closest ReLU pre-activation from its kink.
    /// `None` for models without a nonlinearity.
    pub fn relu_margin(&self, user: usize, item: usize) -> Option<f64> {
        match self.kind {
            ModelKind::Bpr => None,
            ModelKind::NeuMf => Some(neumf::relu_margin(self, user, item)),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }
}

/// Maps an (anchor, candidate) pair on `side` to (user, item).
#[inline]
pub fn pair(side: Side, anchor: usize, candidate: usize) -> (usize, usize) {
    match side {
        Side::User => (anchor, candidate),
        Side::Item => (candidate, anchor),
    }
}

/// Row-sparse gradient buffers shaped like a [`ModelParams`].
#[derive(Debug, Clone)]
pub struct Gradients {
    tensors: Vec<GradTensor>,
}

#[derive(Debug, Clone)]
struct GradTensor {
    cols: usize,
    data: Vec<f64>,
    touched: Vec<bool>,
    touched_rows: Vec<usize>,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        let tensors = params
            .tensors
            .iter()
            .map(|t| GradTensor {
                cols: t.cols,
                data: alloc::vec![0.0; t.data.len()],
                touched: alloc::vec![false; t.rows],
                touched_rows: Vec::new(),
            })
            .collect();
        Self { tensors }
    }

    #[inline]
    pub fn row_mut(&mut self, tensor: usize, row: usize) -> &mut [f64] {
        let g = &mut self.tensors[tensor];
        if !g.touched[row] {
            g.touched[row] = true;
            g.touched_rows.push(row);
        }
        &mut g.data[row * g.cols..(row + 1) * g.cols]
    }

    pub fn row(&self, tensor: usize, row: usize) -> &[f64] {
        let g = &self.tensors[tensor];
        &g.data[row * g.cols..(row + 1) * g.cols]
    }

    /// Gradient entry by flat index within a tensor.
    pub fn get(&self, tensor: usize, flat: usize) -> f64 {
        self.tensors[tensor].data[flat]
    }

    /// Rows written since the last [`clear`](Self::clear), in first-touch order.
    pub fn touched_rows(&self, tensor: usize) -> &[usize] {
        &self.tensors[tensor].touched_rows
    }

    pub fn num_tensors(&self) -> usize {
        self.tensors.len()
    }

    /// Zeroes the touched rows and forgets them.
    pub fn clear(&mut self) {
        for g in &mut self.tensors {
            for &r in &g.touched_rows {
                g.data[r * g.cols..(r + 1) * g.cols].fill(0.0);
                g.touched[r] = false;
            }
            g.touched_rows.clear();
        }
    }
}
