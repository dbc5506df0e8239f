//! Distillation math: the relaxed permutation likelihood, rank discrepancy,
//! discrepancy-proportional sampling of correction sets, and the listwise
//! losses built on them (ranking distillation plus user-side and item-side
//! correction).

mod discrepancy;
mod losses;
mod relaxed;
mod sampler;
mod targets;

pub use discrepancy::{discrepancy_over, discrepancy_under};
pub use losses::{correction_loss, icd_loss, listwise_term, rrd_loss, ucd_loss};
pub use relaxed::{relaxed_log_prob, relaxed_log_prob_with_grad, RelaxedGrad};
pub use sampler::{
    sample_correction, top_by_weight, weighted_sample_without_replacement, CorrectionBudget, CorrectionSample,
    CorrectionSet, SelectionRule,
};
pub use targets::{build_rrd_targets, RrdConfig, RrdTarget, RrdTargets};
