#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rankdistill_core::models::{init_params, Gradients, InitConfig, ModelKind, ModelParams};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Parameters with every entry, biases included, drawn from U(-scale, scale).
pub fn random_params(kind: ModelKind, users: usize, items: usize, dim: usize, seed: u64, scale: f64) -> ModelParams {
    let mut r = rng(seed);
    let init = InitConfig { embedding_std: 0.1, item_bias: kind == ModelKind::Bpr };
    let mut p = init_params(kind, users, items, dim, &init, &mut r).unwrap();
    for t in &mut p.tensors {
        for x in &mut t.data {
            *x = r.gen_range(-scale..scale);
        }
    }
    p
}

/// `k` distinct values from `0..n`.
pub fn distinct(r: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    rand::seq::index::sample(r, n, k).into_vec()
}

/// Largest elementwise relative error between the analytic gradient and
/// central differences of `loss` with step `h`, over every parameter.
/// The denominator is floored at `floor` so that entries that are zero on
/// both sides compare as equal.
pub fn max_relative_error(
    params: &ModelParams,
    h: f64,
    floor: f64,
    loss: impl Fn(&ModelParams, &mut Gradients) -> f64,
) -> f64 {
    let mut grads = Gradients::zeros_like(params);
    loss(params, &mut grads);
    let mut scratch = Gradients::zeros_like(params);
    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    for t in 0..params.tensors.len() {
        for k in 0..params.tensors[t].data.len() {
            let orig = probe.tensors[t].data[k];
            probe.tensors[t].data[k] = orig + h;
            let up = loss(&probe, &mut scratch);
            probe.tensors[t].data[k] = orig - h;
            let down = loss(&probe, &mut scratch);
            probe.tensors[t].data[k] = orig;
            scratch.clear();
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads.get(t, k);
            let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor);
            worst = worst.max(err);
        }
    }
    worst
}

/// Direct product form of the relaxed permutation probability.
pub fn brute_force_prob(head: &[f64], tail: &[f64]) -> f64 {
    let tail_mass: f64 = tail.iter().map(|t| t.exp()).sum();
    let mut p = 1.0;
    for k in 0..head.len() {
        let denom: f64 = head[k..].iter().map(|s| s.exp()).sum::<f64>() + tail_mass;
        p *= head[k].exp() / denom;
    }
    p
}

pub mod instances {
    use super::*;
    use rankdistill_core::distill::{
        correction_loss, rrd_loss, CorrectionSample, CorrectionSet, RrdTarget, RrdTargets,
    };
    use rankdistill_core::models::base_loss;
    use rankdistill_core::{Batch, Side};

    pub const H: f64 = 1e-5;
    /// Central differences carry rounding error near `ε·|L|/h ≈ 1e-10`, so
    /// entries whose gradient is zero on both sides are compared absolutely.
    pub const FLOOR: f64 = 1e-5;
    /// Minimum distance of every ReLU pre-activation from its kink, far beyond
    /// what a step of `H` can move it.
    pub const KINK_MARGIN: f64 = 1e-3;

    pub struct Shape {
        pub kind: ModelKind,
        pub users: usize,
        pub items: usize,
        pub dim: usize,
    }

    pub fn shape(r: &mut ChaCha8Rng, kind: ModelKind) -> Shape {
        Shape { kind, users: r.gen_range(3..=6), items: r.gen_range(6..=10), dim: r.gen_range(1..=8) }
    }

    /// Random parameters whose NeuMF tower is smooth around every pair of the
    /// instance, so central differences are valid.
    pub fn smooth_params(s: &Shape, seed: u64) -> ModelParams {
        (0..)
            .map(|k| random_params(s.kind, s.users, s.items, s.dim, seed.wrapping_mul(1_000).wrapping_add(k), 0.5))
            .find(|p| (0..s.users).all(|u| (0..s.items).all(|i| p.relu_margin(u, i).is_none_or(|m| m >= KINK_MARGIN))))
            .expect("unbounded search")
    }

    fn counterparts(s: &Shape, side: Side) -> usize {
        match side {
            Side::User => s.items,
            Side::Item => s.users,
        }
    }

    fn anchors(s: &Shape, side: Side) -> usize {
        match side {
            Side::User => s.users,
            Side::Item => s.items,
        }
    }

    /// Worst relative error of the base loss on one random instance.
    pub fn base_loss_error(kind: ModelKind, seed: u64) -> f64 {
        let mut r = rng(seed);
        let s = shape(&mut r, kind);
        let p = smooth_params(&s, seed ^ 0xabc);
        let n_anchors = r.gen_range(1..=2);
        let anchors = distinct(&mut r, s.users, n_anchors);
        let mut positives = Vec::new();
        let mut negatives = Vec::new();
        for _ in &anchors {
            // positives + negatives ≤ 6
            let n_pos = r.gen_range(1..=2);
            let ratio = r.gen_range(1..=2);
            let picked = distinct(&mut r, s.items, n_pos * (1 + ratio));
            positives.push(picked[..n_pos].to_vec());
            negatives.push(picked[n_pos..].to_vec());
        }
        let batch = Batch { side: Side::User, anchors, positives, negatives };
        max_relative_error(&p, H, FLOOR, |m, g| base_loss(m, &batch, 1.0, g).unwrap())
    }

    fn split_list(r: &mut ChaCha8Rng, n: usize) -> (Vec<usize>, Vec<usize>) {
        let total = r.gen_range(2..=6.min(n));
        let head_len = r.gen_range(1..total);
        let picked = distinct(r, n, total);
        (picked[..head_len].to_vec(), picked[head_len..].to_vec())
    }

    /// Worst relative error of the ranking-distillation loss on one instance.
    pub fn rrd_error(kind: ModelKind, seed: u64) -> f64 {
        let mut r = rng(seed);
        let s = shape(&mut r, kind);
        let p = smooth_params(&s, seed ^ 0xdef);
        let side = Side::User;
        let targets = RrdTargets {
            side,
            targets: (0..anchors(&s, side))
                .map(|a| {
                    let (interesting, uninteresting) = split_list(&mut r, counterparts(&s, side));
                    RrdTarget { anchor: a, interesting, uninteresting }
                })
                .collect(),
        };
        let batch = distinct(&mut r, anchors(&s, side), 2);
        let weight = r.gen_range(0.1..2.0);
        max_relative_error(&p, H, FLOOR, |m, g| rrd_loss(m, &targets, &batch, weight, g).unwrap() * weight)
    }

    /// Worst relative error of a correction loss on `side` for one instance.
    pub fn correction_error(kind: ModelKind, side: Side, seed: u64) -> f64 {
        let mut r = rng(seed);
        let s = shape(&mut r, kind);
        let p = smooth_params(&s, seed ^ 0x123);
        let mut set = CorrectionSet::empty(side, anchors(&s, side));
        for a in 0..anchors(&s, side) {
            let (under, over) = split_list(&mut r, counterparts(&s, side));
            let under_teacher_ranks = (0..under.len()).collect();
            set.samples[a] = Some(CorrectionSample { anchor: a, side, under, under_teacher_ranks, over, epoch: 0 });
        }
        let batch = distinct(&mut r, anchors(&s, side), 2);
        let weight = r.gen_range(0.1..2.0);
        max_relative_error(&p, H, FLOOR, |m, g| correction_loss(m, &set, &batch, weight, g).unwrap() * weight)
    }
}

pub mod experiment {
    use rankdistill_core::dataset::Holdout;
    use rankdistill_core::eval::{avg_rank_discrepancy, evaluate, Metric};
    use rankdistill_core::synth::{generate, SynthConfig};
    use rankdistill_core::trainer::{distill_student, train_teacher};
    use rankdistill_core::{AblationMode, InteractionDataset, Method, ModelParams, Side, TrainConfig};

    pub const SEEDS: u64 = 5;
    pub const TEACHER_DIM: usize = 64;
    pub const STUDENT_DIM: usize = 8;
    pub const DISCREPANCY_TOP: usize = 50;

    /// Rank-8 preferences, 300 users, 500 items, about 20 interactions each.
    pub fn dataset(seed: u64) -> InteractionDataset {
        let synth = SynthConfig { seed, ..SynthConfig::default() };
        generate(&synth).unwrap().leave_one_out_split(seed, 3).unwrap()
    }

    /// Shared training settings; the loss weights were chosen on validation
    /// H@5 over the same seeds.
    pub fn config(seed: u64) -> TrainConfig {
        TrainConfig {
            teacher_dim: TEACHER_DIM,
            student_dim: STUDENT_DIM,
            learning_rate: 1e-2,
            l2: 1e-4,
            init_std: 0.1,
            batch_size: 64,
            epochs: 400,
            patience: 20,
            lambda_rrd: 0.01,
            lambda_ucd: 0.001,
            lambda_icd: 0.001,
            seed,
            ..TrainConfig::default()
        }
    }

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum Run {
        Student,
        Rrd,
        Dcd,
        Ablation(AblationMode),
    }

    impl Run {
        pub const ALL: [Run; 7] = [
            Run::Student,
            Run::Rrd,
            Run::Dcd,
            Run::Ablation(AblationMode::NoCorrection),
            Run::Ablation(AblationMode::NoItemSide),
            Run::Ablation(AblationMode::NoUserSide),
            Run::Ablation(AblationMode::NoSampling),
        ];

        pub fn label(self) -> &'static str {
            match self {
                Run::Student => "student",
                Run::Rrd => "rrd",
                Run::Dcd => "dcd",
                Run::Ablation(m) => m.as_str(),
            }
        }

        pub fn config(self, base: &TrainConfig) -> TrainConfig {
            match self {
                Run::Student => Method::Student.apply(base.clone()),
                Run::Rrd => Method::Rrd.apply(base.clone()),
                Run::Dcd => base.clone(),
                Run::Ablation(mode) => TrainConfig { ablation: mode, ..base.clone() },
            }
        }
    }

    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct Outcome {
        pub hit5: f64,
        pub discrepancy_user: f64,
        pub discrepancy_item: f64,
    }

    pub struct SeedResult {
        pub seed: u64,
        pub teacher_hit5: f64,
        /// Indexed like [`Run::ALL`].
        pub runs: Vec<Outcome>,
    }

    impl SeedResult {
        pub fn get(&self, run: Run) -> Outcome {
            self.runs[Run::ALL.iter().position(|&r| r == run).unwrap()]
        }
    }

    fn outcome(teacher: &ModelParams, student: &ModelParams, data: &InteractionDataset) -> Outcome {
        let report = evaluate(student, data, Holdout::Test, &[5]).unwrap();
        Outcome {
            hit5: report.mean(Metric::Hit(5)),
            discrepancy_user: avg_rank_discrepancy(teacher, student, data, Side::User, DISCREPANCY_TOP).unwrap(),
            discrepancy_item: avg_rank_discrepancy(teacher, student, data, Side::Item, DISCREPANCY_TOP).unwrap(),
        }
    }

    pub fn run_seed(seed: u64) -> SeedResult {
        let data = dataset(seed);
        let base = config(seed);
        let teacher = train_teacher(&data, &base, &mut |_| {}).unwrap().params;
        let teacher_hit5 = evaluate(&teacher, &data, Holdout::Test, &[5]).unwrap().mean(Metric::Hit(5));
        let runs = Run::ALL
            .iter()
            .map(|run| {
                let student = distill_student(&data, &teacher, &run.config(&base), &mut |_| {}).unwrap().params;
                outcome(&teacher, &student, &data)
            })
            .collect();
        SeedResult { seed, teacher_hit5, runs }
    }

    pub fn mean(results: &[SeedResult], f: impl Fn(&SeedResult) -> f64) -> f64 {
        results.iter().map(f).sum::<f64>() / results.len() as f64
    }
}
