//! Ranking knowledge distillation for top-N recommenders trained on implicit
//! feedback.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every piece of the
//! pipeline that is pure computation:
//!
//! - [`dataset`]: the interaction store, leave-one-out splits and negative sampling.
//! - [`models`]: BPR and NeuMF scorers with hand-written gradients plus Adam.
//! - [`ranking`]: user-side and item-side ranking lists over candidate pools.
//! - [`distill`]: the relaxed permutation likelihood, rank discrepancy,
//!   discrepancy-proportional sampling and the listwise distillation losses.
//! - [`trainer`]: teacher training and student distillation with ablations.
//! - [`eval`]: hit ratio, reciprocal rank and the rank-discrepancy diagnostic.
//! - [`synth`]: a low-rank synthetic interaction generator.
//!
//! File formats, configuration files and the command line live in the
//! `rankdistill` crate.

#![no_std]
#![deny(unsafe_code)]
// row-major kernels index several buffers with one counter
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod dataset;
pub mod distill;
pub mod error;
pub mod eval;
pub mod fingerprint;
pub mod math;
pub mod models;
pub mod ranking;
pub mod rng;
pub mod synth;
pub mod trainer;

pub use dataset::{Batch, DatasetBuilder, IdMap, InteractionDataset, Side};
pub use error::{Error, Result};
pub use models::{AdamConfig, AdamState, Gradients, InitConfig, ModelKind, ModelParams, Tensor};
pub use ranking::{CandidatePool, PoolConfig, RankingList};
pub use trainer::{AblationMode, Method, TrainConfig};
