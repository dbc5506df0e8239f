//! Teacher training and student distillation.
//!
//! The student objective is
//!
//! ```text
//! L_RS + λ_RRD·L_RRD + λ_UCD·L_UCD + λ_ICD·L_ICD
//! ```
//!
//! RRD targets are built once from the teacher and never change during a
//! run. Correction sets are redrawn every `resample_period` epochs from
//! fresh candidate pools ranked by both models.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;

use crate::dataset::{Holdout, InteractionDataset, Side};
use crate::distill::{
    build_rrd_targets, icd_loss, rrd_loss, sample_correction, ucd_loss, CorrectionBudget, CorrectionSet, RrdConfig,
    RrdTargets, SelectionRule,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate, Metric};
use crate::fingerprint::fingerprint;
use crate::models::{base_loss, init_params, AdamConfig, AdamState, Gradients, InitConfig, ModelKind, ModelParams};
use crate::ranking::{build_pool_with_teacher_head, rank_candidates, top_unobserved, PoolConfig};
use crate::rng::{fork, Rng, Stream};

/// Ablations of the dual correction objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum AblationMode {
    #[default]
    Full,
    /// User-side plus item-side ranking distillation on static teacher
    /// targets, no correction terms.
    NoCorrection,
    NoItemSide,
    NoUserSide,
    /// Deterministic top-M selection by discrepancy instead of sampling.
    NoSampling,
}

impl AblationMode {
    pub const ALL: [AblationMode; 5] = [
        AblationMode::Full,
        AblationMode::NoCorrection,
        AblationMode::NoItemSide,
        AblationMode::NoUserSide,
        AblationMode::NoSampling,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AblationMode::Full => "full",
            AblationMode::NoCorrection => "no_correction",
            AblationMode::NoItemSide => "no_item_side",
            AblationMode::NoUserSide => "no_user_side",
            AblationMode::NoSampling => "no_sampling",
        }
    }
}

impl fmt::Display for AblationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AblationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AblationMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(alloc::format!("unknown ablation mode `{s}`")))
    }
}

/// Distillation method presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Base loss only.
    Student,
    /// Base loss plus ranking distillation.
    Rrd,
    /// Ranking distillation plus user-side and item-side correction.
    Dcd,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Student => "student",
            Method::Rrd => "rrd",
            Method::Dcd => "dcd",
        }
    }

    /// Zeroes the weights the method does not use.
    pub fn apply(self, mut config: TrainConfig) -> TrainConfig {
        match self {
            Method::Student => {
                config.lambda_rrd = 0.0;
                config.lambda_ucd = 0.0;
                config.lambda_icd = 0.0;
            }
            Method::Rrd => {
                config.lambda_ucd = 0.0;
                config.lambda_icd = 0.0;
            }
            Method::Dcd => {}
        }
        config
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "student" => Ok(Method::Student),
            "rrd" => Ok(Method::Rrd),
            "dcd" => Ok(Method::Dcd),
            other => Err(Error::InvalidConfig(alloc::format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    pub model: ModelKind,
    pub teacher_dim: usize,
    pub student_dim: usize,
    /// Upper bound on epochs; early stopping usually ends the run sooner.
    pub epochs: usize,
    /// Users per mini-batch.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub init_std: f64,
    pub item_bias: bool,
    /// Negatives per positive in the base loss.
    pub neg_ratio: usize,
    pub lambda_rrd: f64,
    pub lambda_ucd: f64,
    pub lambda_icd: f64,
    pub mu: f64,
    pub m_under: usize,
    pub m_over: usize,
    pub pool_teacher: usize,
    pub pool_student: usize,
    pub pool_random: usize,
    pub rrd_interesting: usize,
    pub rrd_uninteresting: usize,
    pub rrd_exhaustive_tail: bool,
    pub resample_period: usize,
    pub ablation: AblationMode,
    pub seed: u64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub min_interactions: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Bpr,
            teacher_dim: 200,
            student_dim: 20,
            epochs: 200,
            batch_size: 64,
            learning_rate: 1e-3,
            l2: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            init_std: 0.01,
            item_bias: false,
            neg_ratio: 1,
            lambda_rrd: 0.1,
            lambda_ucd: 0.01,
            lambda_icd: 0.01,
            mu: 1e-3,
            m_under: 40,
            m_over: 40,
            pool_teacher: 100,
            pool_student: 100,
            pool_random: 100,
            rrd_interesting: 40,
            rrd_uninteresting: 40,
            rrd_exhaustive_tail: false,
            resample_period: 5,
            ablation: AblationMode::Full,
            seed: 0,
            patience: 20,
            min_interactions: 3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        for (name, v) in [
            ("lambda_rrd", self.lambda_rrd),
            ("lambda_ucd", self.lambda_ucd),
            ("lambda_icd", self.lambda_icd),
            ("l2", self.l2),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(alloc::format!("{name} must be a finite non-negative number, got {v}"));
            }
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("mu", self.mu),
            ("init_std", self.init_std),
            ("adam_eps", self.adam_eps),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(alloc::format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&v) {
                return fail(alloc::format!("{name} must lie in [0, 1), got {v}"));
            }
        }
        for (name, v) in [
            ("teacher_dim", self.teacher_dim),
            ("student_dim", self.student_dim),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("neg_ratio", self.neg_ratio),
            ("resample_period", self.resample_period),
        ] {
            if v == 0 {
                return fail(alloc::format!("{name} must be at least 1"));
            }
        }
        if self.min_interactions < 3 {
            return fail(alloc::format!("min_interactions must be at least 3, got {}", self.min_interactions));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
            l2: self.l2,
        }
    }

    fn init(&self) -> InitConfig {
        InitConfig { embedding_std: self.init_std, item_bias: self.item_bias }
    }

    pub fn pool(&self) -> PoolConfig {
        PoolConfig { teacher_top: self.pool_teacher, student_top: self.pool_student, random: self.pool_random }
    }

    pub fn rrd(&self) -> RrdConfig {
        RrdConfig {
            interesting: self.rrd_interesting,
            uninteresting: self.rrd_uninteresting,
            exhaustive_tail: self.rrd_exhaustive_tail,
        }
    }

    /// Loss weights and selection rule after applying the ablation mode.
    pub fn objective(&self) -> Objective {
        let mut o = Objective {
            rrd: self.lambda_rrd,
            rrd_item: 0.0,
            ucd: self.lambda_ucd,
            icd: self.lambda_icd,
            rule: SelectionRule::Sampled,
        };
        match self.ablation {
            AblationMode::Full => {}
            AblationMode::NoCorrection => {
                o.rrd_item = self.lambda_rrd;
                o.ucd = 0.0;
                o.icd = 0.0;
            }
            AblationMode::NoItemSide => o.icd = 0.0,
            AblationMode::NoUserSide => o.ucd = 0.0,
            AblationMode::NoSampling => o.rule = SelectionRule::Deterministic,
        }
        o
    }
}

/// Effective loss weights of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub rrd: f64,
    /// Item-side ranking distillation (only in the no-correction ablation).
    pub rrd_item: f64,
    pub ucd: f64,
    pub icd: f64,
    pub rule: SelectionRule,
}

/// Per-epoch training record. Loss components are unweighted batch means;
/// `total` is the weighted objective.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub l_rs: f64,
    pub l_rrd: f64,
    pub l_rrd_item: f64,
    pub l_ucd: f64,
    pub l_icd: f64,
    pub total: f64,
    pub valid_hit5: f64,
    pub valid_mrr5: f64,
    /// Correction sets were redrawn at the start of this epoch.
    pub resampled: bool,
    pub targets_fingerprint: u64,
    pub samples_fingerprint: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
}

pub struct TrainOutcome {
    /// Parameters at the best validation epoch.
    pub params: ModelParams,
    pub adam: AdamState,
    pub log: TrainLog,
    /// Correction sets in force at the end of training (user side, item side).
    pub corrections: Option<(CorrectionSet, CorrectionSet)>,
}

struct DistillContext<'a> {
    teacher: &'a ModelParams,
    objective: Objective,
    user_targets: Option<RrdTargets>,
    item_targets: Option<RrdTargets>,
    teacher_heads: [Vec<Vec<usize>>; 2],
}

/// Trains the teacher on the base loss alone.
pub fn train_teacher(
    dataset: &InteractionDataset,
    config: &TrainConfig,
    observer: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    run(dataset, config, config.teacher_dim, None, observer)
}

/// Distills a student of `config.student_dim` from `teacher`.
pub fn distill_student(
    dataset: &InteractionDataset,
    teacher: &ModelParams,
    config: &TrainConfig,
    observer: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    teacher.check_dims(dataset.num_users(), dataset.num_items())?;
    teacher.validate()?;
    let objective = config.objective();
    let rrd_cfg = config.rrd();
    let user_targets = if objective.rrd > 0.0 {
        Some(build_rrd_targets(teacher, dataset, Side::User, &rrd_cfg, &mut fork(config.seed, Stream::Targets))?)
    } else {
        None
    };
    let item_targets = if objective.rrd_item > 0.0 {
        let mut rng = fork(config.seed ^ 0x9e37_79b9_7f4a_7c15, Stream::Targets);
        Some(build_rrd_targets(teacher, dataset, Side::Item, &rrd_cfg, &mut rng)?)
    } else {
        None
    };
    let heads = |side: Side, needed: bool| -> Vec<Vec<usize>> {
        if !needed {
            return Vec::new();
        }
        (0..dataset.num_anchors(side))
            .map(|a| top_unobserved(dataset, side, a, &teacher.score_all(side, a), config.pool_teacher))
            .collect()
    };
    let teacher_heads = [heads(Side::User, objective.ucd > 0.0), heads(Side::Item, objective.icd > 0.0)];
    let ctx = DistillContext { teacher, objective, user_targets, item_targets, teacher_heads };
    run(dataset, config, config.student_dim, Some(ctx), observer)
}

/// Distills with `mode` applied to `config` and evaluates on the test split.
pub fn run_ablation(
    dataset: &InteractionDataset,
    teacher: &ModelParams,
    config: &TrainConfig,
    mode: AblationMode,
    ns: &[usize],
) -> Result<(TrainOutcome, crate::eval::MetricReport)> {
    let cfg = TrainConfig { ablation: mode, ..config.clone() };
    let outcome = distill_student(dataset, teacher, &cfg, &mut |_| {})?;
    let report = evaluate(&outcome.params, dataset, Holdout::Test, ns)?;
    Ok((outcome, report))
}

#[allow(clippy::too_many_arguments)]
fn resample(
    dataset: &InteractionDataset,
    ctx: &DistillContext<'_>,
    student: &ModelParams,
    side: Side,
    config: &TrainConfig,
    epoch: usize,
    pool_rng: &mut Rng,
    sample_rng: &mut Rng,
) -> Result<CorrectionSet> {
    let heads = &ctx.teacher_heads[side as usize];
    let budget = CorrectionBudget { under: config.m_under, over: config.m_over };
    let pool_cfg = config.pool();
    let mut set = CorrectionSet::empty(side, dataset.num_anchors(side));
    set.epoch = epoch;
    for anchor in 0..dataset.num_anchors(side) {
        // anchors without training interactions never appear in a batch
        if dataset.train_counterparts(side, anchor).is_empty() {
            continue;
        }
        let pool = build_pool_with_teacher_head(dataset, &heads[anchor], student, side, anchor, &pool_cfg, pool_rng);
        if pool.candidates.is_empty() {
            continue;
        }
        let teacher_list = rank_candidates(ctx.teacher, &pool)?;
        let student_list = rank_candidates(student, &pool)?;
        let sample =
            sample_correction(&teacher_list, &student_list, config.mu, budget, ctx.objective.rule, epoch, sample_rng)?;
        set.samples[anchor] = Some(sample);
    }
    Ok(set)
}

fn validation(params: &ModelParams, dataset: &InteractionDataset) -> Result<(f64, f64)> {
    if dataset.held_out_pairs(Holdout::Valid).next().is_none() {
        return Ok((0.0, 0.0));
    }
    let r = evaluate(params, dataset, Holdout::Valid, &[5])?;
    Ok((r.mean(Metric::Hit(5)), r.mean(Metric::Mrr(5))))
}

fn run(
    dataset: &InteractionDataset,
    config: &TrainConfig,
    dim: usize,
    ctx: Option<DistillContext<'_>>,
    observer: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    let seed = config.seed;
    let mut params = init_params(
        config.model,
        dataset.num_users(),
        dataset.num_items(),
        dim,
        &config.init(),
        &mut fork(seed, Stream::Init),
    )?;
    let mut adam = AdamState::new(&params, config.adam());
    let mut grads = Gradients::zeros_like(&params);
    let mut neg_rng = fork(seed, Stream::Negatives);
    let mut shuffle_rng = fork(seed, Stream::Shuffle);
    let mut pool_rngs = [fork(seed, Stream::Pools), fork(seed, Stream::ItemPools)];
    let mut sample_rngs = [fork(seed, Stream::Sampler), fork(seed, Stream::ItemSampler)];

    let mut users: Vec<usize> = (0..dataset.num_users()).filter(|&u| !dataset.train_items(u).is_empty()).collect();
    if users.is_empty() {
        return Err(Error::EmptyInput("no users with training interactions"));
    }
    let objective = ctx.as_ref().map(|c| c.objective);
    let needs = |side: Side| match (objective, side) {
        (Some(o), Side::User) => o.ucd > 0.0,
        (Some(o), Side::Item) => o.icd > 0.0,
        (None, _) => false,
    };
    let mut corrections = [CorrectionSet::empty(Side::User, 0), CorrectionSet::empty(Side::Item, 0)];

    let mut log = TrainLog::default();
    let mut best: Option<((f64, f64), ModelParams, AdamState)> = None;

    for epoch in 0..config.epochs {
        let resampled =
            ctx.is_some() && (needs(Side::User) || needs(Side::Item)) && epoch % config.resample_period == 0;
        if resampled {
            let c = ctx.as_ref().expect("distillation context");
            for side in [Side::User, Side::Item] {
                if needs(side) {
                    let k = side as usize;
                    corrections[k] =
                        resample(dataset, c, &params, side, config, epoch, &mut pool_rngs[k], &mut sample_rngs[k])?;
                }
            }
        }

        users.shuffle(&mut shuffle_rng);
        let mut sums = [0.0f64; 6];
        let mut batches = 0usize;
        for chunk in users.chunks(config.batch_size) {
            grads.clear();
            let batch = dataset.user_batch(chunk, config.neg_ratio, &mut neg_rng)?;
            let l_rs = base_loss(&params, &batch, 1.0, &mut grads)?;
            let (mut l_rrd, mut l_rrd_item, mut l_ucd, mut l_icd) = (0.0, 0.0, 0.0, 0.0);
            let mut total = l_rs;
            if let (Some(c), Some(o)) = (ctx.as_ref(), objective) {
                let items = if o.icd > 0.0 || o.rrd_item > 0.0 { batch.distinct_positives() } else { Vec::new() };
                if let Some(t) = &c.user_targets {
                    l_rrd = rrd_loss(&params, t, chunk, o.rrd, &mut grads)?;
                    total += o.rrd * l_rrd;
                }
                if let Some(t) = &c.item_targets {
                    l_rrd_item = rrd_loss(&params, t, &items, o.rrd_item, &mut grads)?;
                    total += o.rrd_item * l_rrd_item;
                }
                if o.ucd > 0.0 {
                    l_ucd = ucd_loss(&params, &corrections[0], chunk, o.ucd, &mut grads)?;
                    total += o.ucd * l_ucd;
                }
                if o.icd > 0.0 {
                    l_icd = icd_loss(&params, &corrections[1], &items, o.icd, &mut grads)?;
                    total += o.icd * l_icd;
                }
            }
            if !total.is_finite() {
                return Err(Error::Diverged { epoch, loss: total });
            }
            adam.step(&mut params, &grads)?;
            for (s, v) in sums.iter_mut().zip([l_rs, l_rrd, l_rrd_item, l_ucd, l_icd, total]) {
                *s += v;
            }
            batches += 1;
        }
        let n = batches as f64;
        let (valid_hit5, valid_mrr5) = validation(&params, dataset)?;
        let record = EpochRecord {
            epoch,
            l_rs: sums[0] / n,
            l_rrd: sums[1] / n,
            l_rrd_item: sums[2] / n,
            l_ucd: sums[3] / n,
            l_icd: sums[4] / n,
            total: sums[5] / n,
            valid_hit5,
            valid_mrr5,
            resampled,
            targets_fingerprint: ctx
                .as_ref()
                .map_or(0, |c| fingerprint(&(c.user_targets.as_ref(), c.item_targets.as_ref()))),
            samples_fingerprint: fingerprint(&corrections),
        };
        observer(&record);
        log.epochs.push(record);

        let score = (valid_hit5, valid_mrr5);
        let improved = match &best {
            None => true,
            Some((b, _, _)) => score.0 > b.0 || (score.0 == b.0 && score.1 > b.1),
        };
        if improved {
            best = Some((score, params.clone(), adam.clone()));
            log.best_epoch = epoch;
        } else if epoch - log.best_epoch >= config.patience {
            break;
        }
    }

    let (_, params, adam) = best.expect("at least one epoch");
    let corrections = ctx.map(|_| {
        let [u, i] = corrections;
        (u, i)
    });
    Ok(TrainOutcome { params, adam, log, corrections })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ablation_weights() {
        let base = TrainConfig { lambda_rrd: 0.1, lambda_ucd: 0.01, lambda_icd: 0.02, ..TrainConfig::default() };
        let o = |mode| TrainConfig { ablation: mode, ..base.clone() }.objective();
        assert_eq!(
            o(AblationMode::Full),
            Objective { rrd: 0.1, rrd_item: 0.0, ucd: 0.01, icd: 0.02, rule: SelectionRule::Sampled }
        );
        assert_eq!(
            o(AblationMode::NoCorrection),
            Objective { rrd: 0.1, rrd_item: 0.1, ucd: 0.0, icd: 0.0, rule: SelectionRule::Sampled }
        );
        assert_eq!(o(AblationMode::NoItemSide).icd, 0.0);
        assert_eq!(o(AblationMode::NoUserSide).ucd, 0.0);
        assert_eq!(o(AblationMode::NoSampling).rule, SelectionRule::Deterministic);
        assert_eq!(AblationMode::ALL.len(), 5);
        assert_eq!("no_sampling".parse::<AblationMode>().unwrap(), AblationMode::NoSampling);
        assert!("nope".parse::<AblationMode>().is_err());
    }

    #[test]
    fn method_presets() {
        let base = TrainConfig::default();
        let s = Method::Student.apply(base.clone());
        assert_eq!((s.lambda_rrd, s.lambda_ucd, s.lambda_icd), (0.0, 0.0, 0.0));
        let r = Method::Rrd.apply(base.clone());
        assert_eq!((r.lambda_rrd, r.lambda_ucd, r.lambda_icd), (base.lambda_rrd, 0.0, 0.0));
        assert_eq!(Method::Dcd.apply(base.clone()), base);
    }

    #[test]
    fn validation_rejects_bad_values() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { lambda_ucd: -1.0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { resample_period: 0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { student_dim: 0, ..TrainConfig::default() }.validate().is_err());
    }
}
