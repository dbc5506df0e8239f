//! Synthetic implicit feedback from a low-rank preference model.
//!
//! Users and items get standard-normal latent factors of dimension `rank`;
//! item `i` gets an additional popularity offset. Each user then picks a
//! fixed number of distinct items with probability proportional to
//! `exp(sharpness · ⟨u, v_i⟩ / √rank + pop_i)`, drawn with the Gumbel-top-k
//! trick.

use alloc::vec::Vec;

use rand::Rng;

use crate::dataset::InteractionDataset;
use crate::error::{Error, Result};
use crate::math::{ln, sqrt};
use crate::rng::{fork, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub num_users: usize,
    pub num_items: usize,
    pub rank: usize,
    /// Interactions per user are uniform in `mean ± spread`.
    pub mean_interactions: usize,
    pub spread: usize,
    pub sharpness: f64,
    pub popularity_std: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_users: 300,
            num_items: 500,
            rank: 8,
            mean_interactions: 20,
            spread: 5,
            sharpness: 2.0,
            popularity_std: 0.5,
            seed: 2022,
        }
    }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1 = 1.0 - rng.gen::<f64>();
    let u2 = rng.gen::<f64>();
    sqrt(-2.0 * ln(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}

/// Generated (user, item) pairs, dense indices.
pub fn generate_pairs(config: &SynthConfig) -> Result<Vec<(usize, usize)>> {
    let SynthConfig { num_users, num_items, rank, mean_interactions, spread, sharpness, popularity_std, seed } =
        *config;
    if num_users == 0 || num_items == 0 || rank == 0 {
        return Err(Error::InvalidConfig("synthetic dataset needs users, items and rank > 0".into()));
    }
    if spread > mean_interactions || mean_interactions + spread >= num_items {
        return Err(Error::InvalidConfig("interactions per user must fit inside the catalog".into()));
    }
    let mut rng = fork(seed, Stream::Synth);
    let users: Vec<f64> = (0..num_users * rank).map(|_| gaussian(&mut rng)).collect();
    let items: Vec<f64> = (0..num_items * rank).map(|_| gaussian(&mut rng)).collect();
    let popularity: Vec<f64> = (0..num_items).map(|_| popularity_std * gaussian(&mut rng)).collect();
    let norm = sqrt(rank as f64);

    let mut pairs = Vec::new();
    for u in 0..num_users {
        let count = rng.gen_range(mean_interactions - spread..=mean_interactions + spread);
        let uvec = &users[u * rank..(u + 1) * rank];
        let mut keyed: Vec<(f64, usize)> = (0..num_items)
            .map(|i| {
                let affinity: f64 = uvec.iter().zip(&items[i * rank..(i + 1) * rank]).map(|(a, b)| a * b).sum();
                let logit = sharpness * affinity / norm + popularity[i];
                // Gumbel(0, 1) noise
                let e = (-ln(1.0 - rng.gen::<f64>())).max(f64::MIN_POSITIVE);
                let g = -ln(e);
                (logit + g, i)
            })
            .collect();
        keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        pairs.extend(keyed[..count].iter().map(|&(_, i)| (u, i)));
    }
    Ok(pairs)
}

pub fn generate(config: &SynthConfig) -> Result<InteractionDataset> {
    InteractionDataset::from_index_pairs(config.num_users, config.num_items, &generate_pairs(config)?)
}
