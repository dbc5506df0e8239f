//! NeuMF forward and backward passes.
//!
//! Layout: a GMF branch `gu ⊙ gi` (width d) and an MLP tower over
//! `[pu; qi]` with widths 2d -> d -> max(d/2, 1) and ReLU, concatenated and
//! projected to a scalar by a linear output layer.

use alloc::vec::Vec;

use super::{
    neumf_last_width, pair, Gradients, ModelParams, GMF_ITEM, GMF_USER, ITEM_EMB, MLP_B1, MLP_B2, MLP_W1, MLP_W2,
    OUT_B, OUT_W, USER_EMB,
};
use crate::dataset::Side;

pub(super) struct Forward {
    pub output: f64,
    z1: Vec<f64>,
    a1: Vec<f64>,
    z2: Vec<f64>,
    a2: Vec<f64>,
}

/// Pre-activation of the first MLP layer contributed by the user half
/// (`user_half = true`) or the item half of the input, without bias.
fn first_layer_half(p: &ModelParams, vec: &[f64], user_half: bool) -> Vec<f64> {
    let d = p.dim;
    let w1 = &p.tensors[MLP_W1];
    let offset = if user_half { 0 } else { d };
    (0..d)
        .map(|r| {
            let row = &w1.row(r)[offset..offset + d];
            row.iter().zip(vec).map(|(w, x)| w * x).sum()
        })
        .collect()
}

fn finish(p: &ModelParams, user: usize, item: usize, mut z1: Vec<f64>) -> Forward {
    let d = p.dim;
    let h2 = neumf_last_width(d);
    let b1 = &p.tensors[MLP_B1].data;
    for (z, b) in z1.iter_mut().zip(b1) {
        *z += b;
    }
    let a1: Vec<f64> = z1.iter().map(|&z| z.max(0.0)).collect();
    let w2 = &p.tensors[MLP_W2];
    let b2 = &p.tensors[MLP_B2].data;
    let z2: Vec<f64> = (0..h2).map(|r| w2.row(r).iter().zip(&a1).map(|(w, a)| w * a).sum::<f64>() + b2[r]).collect();
    let a2: Vec<f64> = z2.iter().map(|&z| z.max(0.0)).collect();

    let gu = p.tensors[GMF_USER].row(user);
    let gi = p.tensors[GMF_ITEM].row(item);
    let w = &p.tensors[OUT_W].data;
    let mut output = p.tensors[OUT_B].data[0];
    for k in 0..d {
        output += w[k] * gu[k] * gi[k];
    }
    for r in 0..h2 {
        output += w[d + r] * a2[r];
    }
    Forward { output, z1, a1, z2, a2 }
}

pub(super) fn forward(p: &ModelParams, user: usize, item: usize) -> Forward {
    let mut z1 = first_layer_half(p, p.tensors[USER_EMB].row(user), true);
    let zi = first_layer_half(p, p.tensors[ITEM_EMB].row(item), false);
    for (a, b) in z1.iter_mut().zip(zi) {
        *a += b;
    }
    finish(p, user, item, z1)
}

/// Smallest absolute ReLU pre-activation of the tower for one pair.
pub(super) fn relu_margin(p: &ModelParams, user: usize, item: usize) -> f64 {
    let f = forward(p, user, item);
    f.z1.iter().chain(&f.z2).fold(f64::INFINITY, |m, z| m.min(z.abs()))
}

pub(super) fn score_all(p: &ModelParams, side: Side, anchor: usize) -> Vec<f64> {
    let (anchor_table, other_table, anchor_is_user) = match side {
        Side::User => (USER_EMB, ITEM_EMB, true),
        Side::Item => (ITEM_EMB, USER_EMB, false),
    };
    let fixed = first_layer_half(p, p.tensors[anchor_table].row(anchor), anchor_is_user);
    let count = p.tensors[other_table].rows;
    (0..count)
        .map(|c| {
            let mut z1 = first_layer_half(p, p.tensors[other_table].row(c), !anchor_is_user);
            for (a, b) in z1.iter_mut().zip(&fixed) {
                *a += b;
            }
            let (u, i) = pair(side, anchor, c);
            finish(p, u, i, z1).output
        })
        .collect()
}

pub(super) fn backward(p: &ModelParams, user: usize, item: usize, dout: f64, grads: &mut Gradients) {
    let d = p.dim;
    let h2 = neumf_last_width(d);
    let f = forward(p, user, item);
    let w = &p.tensors[OUT_W].data;
    let gu = p.tensors[GMF_USER].row(user);
    let gi = p.tensors[GMF_ITEM].row(item);

    {
        let gw = grads.row_mut(OUT_W, 0);
        for k in 0..d {
            gw[k] += dout * gu[k] * gi[k];
        }
        for r in 0..h2 {
            gw[d + r] += dout * f.a2[r];
        }
    }
    grads.row_mut(OUT_B, 0)[0] += dout;
    {
        let g = grads.row_mut(GMF_USER, user);
        for k in 0..d {
            g[k] += dout * w[k] * gi[k];
        }
    }
    {
        let g = grads.row_mut(GMF_ITEM, item);
        for k in 0..d {
            g[k] += dout * w[k] * gu[k];
        }
    }

    let dz2: Vec<f64> = (0..h2).map(|r| if f.z2[r] > 0.0 { dout * w[d + r] } else { 0.0 }).collect();
    let w2 = &p.tensors[MLP_W2];
    for r in 0..h2 {
        if dz2[r] == 0.0 {
            continue;
        }
        let g = grads.row_mut(MLP_W2, r);
        for c in 0..d {
            g[c] += dz2[r] * f.a1[c];
        }
    }
    {
        let g = grads.row_mut(MLP_B2, 0);
        for r in 0..h2 {
            g[r] += dz2[r];
        }
    }
    let dz1: Vec<f64> =
        (0..d).map(|c| if f.z1[c] > 0.0 { (0..h2).map(|r| w2.row(r)[c] * dz2[r]).sum() } else { 0.0 }).collect();
    let pu = p.tensors[USER_EMB].row(user);
    let qi = p.tensors[ITEM_EMB].row(item);
    for r in 0..d {
        if dz1[r] == 0.0 {
            continue;
        }
        let g = grads.row_mut(MLP_W1, r);
        for c in 0..d {
            g[c] += dz1[r] * pu[c];
            g[d + c] += dz1[r] * qi[c];
        }
    }
    {
        let g = grads.row_mut(MLP_B1, 0);
        for r in 0..d {
            g[r] += dz1[r];
        }
    }
    let w1 = &p.tensors[MLP_W1];
    let mut dpu = alloc::vec![0.0; d];
    let mut dqi = alloc::vec![0.0; d];
    for r in 0..d {
        if dz1[r] == 0.0 {
            continue;
        }
        let row = w1.row(r);
        for c in 0..d {
            dpu[c] += row[c] * dz1[r];
            dqi[c] += row[d + c] * dz1[r];
        }
    }
    for (g, v) in grads.row_mut(USER_EMB, user).iter_mut().zip(&dpu) {
        *g += v;
    }
    for (g, v) in grads.row_mut(ITEM_EMB, item).iter_mut().zip(&dqi) {
        *g += v;
    }
}
