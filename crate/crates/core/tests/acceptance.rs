//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::experiment::{self, Run, SeedResult};
use common::instances::{base_loss_error, correction_error, rrd_error};
use common::{brute_force_prob, distinct, rng};
use rand::Rng;
use rankdistill_core::dataset::Holdout;
use rankdistill_core::distill::{
    discrepancy_over, discrepancy_under, icd_loss, relaxed_log_prob, sample_correction, ucd_loss,
    weighted_sample_without_replacement, CorrectionBudget, CorrectionSet, SelectionRule,
};
use rankdistill_core::eval::{evaluate, hit_at_n, mrr_at_n, Metric};
use rankdistill_core::models::{init_params, InitConfig};
use rankdistill_core::ranking::rank_candidates;
use rankdistill_core::synth::{generate, SynthConfig};
use rankdistill_core::trainer::distill_student;
use rankdistill_core::{
    AblationMode, CandidatePool, Gradients, InteractionDataset, ModelKind, ModelParams, Side, TrainConfig,
};
use statrs::distribution::{ChiSquared, ContinuousCDF};

struct Verdict {
    ok: bool,
    detail: String,
}

fn verdict(ok: bool, detail: String) -> Verdict {
    Verdict { ok, detail }
}

/// Every check that must hold, joined into one verdict.
fn all(checks: Vec<(bool, String)>) -> Verdict {
    let ok = checks.iter().all(|c| c.0);
    let detail = checks
        .into_iter()
        .map(|(pass, msg)| if pass { msg } else { format!("NOT {msg}") })
        .collect::<Vec<_>>()
        .join("; ");
    verdict(ok, detail)
}

fn relaxed_oracle() -> Verdict {
    let mut r = rng(11);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let total = r.gen_range(1..=6);
        let head_len = r.gen_range(1..=total);
        let scores: Vec<f64> = (0..total).map(|_| r.gen_range(-6.0..6.0)).collect();
        let (head, tail) = scores.split_at(head_len);
        let stable = relaxed_log_prob(head, tail).unwrap().exp();
        worst = worst.max((stable - brute_force_prob(head, tail)).abs());
    }
    verdict(worst <= 1e-12, format!("200 instances, max |p - p_direct| = {worst:.2e} (tol 1e-12)"))
}

fn gradient_suites() -> Verdict {
    let worst = |f: &dyn Fn(u64) -> f64| (0..50).map(f).fold(0.0, f64::max);
    let suites: [(&str, f64); 6] = [
        ("L_RS bpr", worst(&|s| base_loss_error(ModelKind::Bpr, 1_000 + s))),
        ("L_RS neumf", worst(&|s| base_loss_error(ModelKind::NeuMf, 2_000 + s))),
        ("L_RRD", worst(&|s| rrd_error(if s % 2 == 0 { ModelKind::Bpr } else { ModelKind::NeuMf }, 3_000 + s))),
        (
            "L_UCD",
            worst(&|s| {
                correction_error(if s % 2 == 0 { ModelKind::Bpr } else { ModelKind::NeuMf }, Side::User, 4_000 + s)
            }),
        ),
        (
            "L_ICD",
            worst(&|s| {
                correction_error(if s % 2 == 0 { ModelKind::Bpr } else { ModelKind::NeuMf }, Side::Item, 5_000 + s)
            }),
        ),
        ("L_RRD neumf", worst(&|s| rrd_error(ModelKind::NeuMf, 6_000 + s))),
    ];
    all(suites.iter().map(|&(name, e)| (e <= 1e-4, format!("{name} max rel err {e:.1e}"))).collect())
}

fn discrepancy_math() -> Verdict {
    let mu = 1e-3;
    let table = [
        (discrepancy_under(18, 10, mu), 0.007_999_829, 1e-9),
        (discrepancy_over(10, 18, mu), 0.007_999_829, 1e-9),
        (discrepancy_under(10, 10, mu), 0.0, 0.0),
        (discrepancy_under(3, 10, mu), 0.0, 0.0),
        (discrepancy_over(18, 10, mu), 0.0, 0.0),
    ];
    let table_ok = table.iter().all(|&(got, want, tol)| (got - want).abs() <= tol);
    let mut r = rng(3);
    let mut violations = 0;
    for _ in 0..10_000 {
        let t = r.gen_range(0..5_000usize);
        let a = r.gen_range(0..5_000usize);
        let b = r.gen_range(0..5_000usize);
        let (lo, hi) = (a.min(b), a.max(b));
        // a larger student rank never lowers the underestimation error
        if discrepancy_under(lo, t, mu) > discrepancy_under(hi, t, mu) {
            violations += 1;
        }
        if discrepancy_over(hi, t, mu) > discrepancy_over(lo, t, mu) {
            violations += 1;
        }
    }
    all(vec![
        (table_ok, format!("table ok, gap 8 -> {:.9}", table[0].0)),
        (violations == 0, format!("{violations} monotonicity violations over 10^4 pairs")),
    ])
}

fn sampler_proportionality() -> Verdict {
    let weights = [0.5, 0.0, 1.0, 2.0, 0.25, 0.0, 3.0, 1.25];
    let draws = 100_000;
    let mut r = rng(4);
    let mut counts = [0usize; 8];
    for _ in 0..draws {
        let s = weighted_sample_without_replacement(&weights, 1, &mut r);
        counts[s[0]] += 1;
    }
    let total: f64 = weights.iter().sum();
    let positive: Vec<usize> = (0..weights.len()).filter(|&k| weights[k] > 0.0).collect();
    let chi2: f64 = positive
        .iter()
        .map(|&k| {
            let expected = draws as f64 * weights[k] / total;
            (counts[k] as f64 - expected).powi(2) / expected
        })
        .sum();
    let dof = (positive.len() - 1) as f64;
    let p = 1.0 - ChiSquared::new(dof).unwrap().cdf(chi2);
    let zero_drawn = counts[1] + counts[5];

    let mut repeats = 0;
    for _ in 0..2_000 {
        let mut s = weighted_sample_without_replacement(&weights, 4, &mut r);
        let len = s.len();
        s.sort_unstable();
        s.dedup();
        repeats += len - s.len();
        repeats += s.iter().filter(|&&k| weights[k] == 0.0).count();
    }
    all(vec![
        (p > 0.01, format!("chi2 {chi2:.2} on {dof} dof, p = {p:.3}")),
        (zero_drawn == 0, format!("{zero_drawn} zero-weight draws")),
        (repeats == 0, format!("{repeats} repeated or zero-weight picks without replacement")),
    ])
}

fn metric_correctness() -> Verdict {
    let table = [
        (hit_at_n(3, 10), 1.0),
        (mrr_at_n(3, 10), 0.25),
        (hit_at_n(0, 5), 1.0),
        (mrr_at_n(0, 5), 1.0),
        (hit_at_n(5, 5), 0.0),
        (mrr_at_n(5, 5), 0.0),
        (mrr_at_n(9, 10), 0.1),
    ];
    let table_ok = table.iter().all(|&(got, want)| got == want);

    // two users, four items; user 0 holds out item 2, user 1 holds out item 0
    let data = InteractionDataset::from_index_pairs(2, 4, &[(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 3)])
        .unwrap()
        .with_split(&[
            rankdistill_core::dataset::SplitAssignment { user: 0, valid: 1, test: 2 },
            rankdistill_core::dataset::SplitAssignment { user: 1, valid: 3, test: 0 },
        ])
        .unwrap();
    let mut params = init_params(ModelKind::Bpr, 2, 4, 1, &InitConfig::default(), &mut rng(0)).unwrap();
    params.tensors[0].data = vec![1.0, 1.0];
    params.tensors[1].data = vec![0.1, 3.0, 2.0, 5.0];
    // user 0 candidates {2, 3}: item 2 is rank 1; user 1 candidates {0, 2}: item 0 is rank 1
    let report = evaluate(&params, &data, Holdout::Test, &[1, 5]).unwrap();
    let report_ok =
        report.mean(Metric::Hit(1)) == 0.0 && report.mean(Metric::Hit(5)) == 1.0 && report.mean(Metric::Mrr(5)) == 0.5;

    let mut r = rng(5);
    let mut violations = 0;
    for _ in 0..10_000 {
        let rank = r.gen_range(0..200);
        let n = r.gen_range(1..100);
        if mrr_at_n(rank, n) > hit_at_n(rank, n) {
            violations += 1;
        }
    }
    all(vec![
        (table_ok, "hand-computed table".into()),
        (report_ok, "evaluate on a 2-user fixture".into()),
        (violations == 0, format!("{violations} cases with M@N > H@N")),
    ])
}

fn synthetic_experiment() -> Vec<SeedResult> {
    (0..experiment::SEEDS).map(experiment::run_seed).collect()
}

fn end_to_end(results: &[SeedResult]) -> Verdict {
    let teacher = experiment::mean(results, |r| r.teacher_hit5);
    let student = experiment::mean(results, |r| r.get(Run::Student).hit5);
    let rrd = experiment::mean(results, |r| r.get(Run::Rrd).hit5);
    let dcd = experiment::mean(results, |r| r.get(Run::Dcd).hit5);
    all(vec![
        (teacher > student, format!("teacher {teacher:.4} > student {student:.4}")),
        (dcd >= rrd, format!("dcd {dcd:.4} >= rrd {rrd:.4}")),
        (rrd >= student, format!("rrd {rrd:.4} >= student {student:.4}")),
    ])
}

fn discrepancy_reduction(results: &[SeedResult]) -> Verdict {
    let m = |run: Run, side: Side| {
        experiment::mean(results, |r| {
            let o = r.get(run);
            match side {
                Side::User => o.discrepancy_user,
                Side::Item => o.discrepancy_item,
            }
        })
    };
    let checks = [Side::User, Side::Item]
        .into_iter()
        .map(|side| {
            let (dcd, rrd) = (m(Run::Dcd, side), m(Run::Rrd, side));
            (dcd < rrd, format!("{} dcd {dcd:.2} < rrd {rrd:.2}", side.as_str()))
        })
        .collect();
    all(checks)
}

fn ablation_direction(results: &[SeedResult]) -> Verdict {
    let full = experiment::mean(results, |r| r.get(Run::Dcd).hit5);
    let checks =
        [AblationMode::NoCorrection, AblationMode::NoItemSide, AblationMode::NoUserSide, AblationMode::NoSampling]
            .into_iter()
            .map(|mode| {
                let v = experiment::mean(results, |r| r.get(Run::Ablation(mode)).hit5);
                (full >= v, format!("full {full:.4} >= {mode} {v:.4}"))
            })
            .collect();
    all(checks)
}

fn small_dataset(seed: u64) -> InteractionDataset {
    let cfg =
        SynthConfig { num_users: 60, num_items: 90, mean_interactions: 10, spread: 3, seed, ..SynthConfig::default() };
    generate(&cfg).unwrap()
}

fn transpose(data: &InteractionDataset) -> InteractionDataset {
    let pairs: Vec<(usize, usize)> =
        (0..data.num_users()).flat_map(|u| data.train_items(u).iter().map(move |&i| (i, u))).collect();
    InteractionDataset::from_index_pairs(data.num_items(), data.num_users(), &pairs).unwrap()
}

fn transpose_params(p: &ModelParams) -> ModelParams {
    let mut t = p.clone();
    t.tensors.swap(0, 1);
    t.num_users = p.num_items;
    t.num_items = p.num_users;
    t
}

fn invariants() -> Verdict {
    let mut checks = Vec::new();

    // shift invariance of the relaxed permutation probability
    let mut r = rng(9);
    let mut worst: f64 = 0.0;
    for _ in 0..1_000 {
        let total = r.gen_range(1..=12);
        let head_len = r.gen_range(1..=total);
        let scores: Vec<f64> = (0..total).map(|_| r.gen_range(-10.0..10.0)).collect();
        let c = r.gen_range(-500.0..500.0);
        let shifted: Vec<f64> = scores.iter().map(|s| s + c).collect();
        let a = relaxed_log_prob(&scores[..head_len], &scores[head_len..]).unwrap();
        let b = relaxed_log_prob(&shifted[..head_len], &shifted[head_len..]).unwrap();
        worst = worst.max((a - b).abs());
    }
    checks.push((worst <= 1e-9, format!("shift invariance max diff {worst:.1e}")));

    // target constancy and resampling cadence over a short distillation run
    let data = small_dataset(21).leave_one_out_split(21, 3).unwrap();
    let base = TrainConfig {
        teacher_dim: 16,
        student_dim: 4,
        epochs: 12,
        patience: 100,
        learning_rate: 1e-2,
        resample_period: 5,
        pool_teacher: 20,
        pool_student: 20,
        pool_random: 20,
        m_under: 10,
        m_over: 10,
        rrd_interesting: 10,
        rrd_uninteresting: 10,
        seed: 21,
        ..TrainConfig::default()
    };
    let mut teacher =
        init_params(ModelKind::Bpr, data.num_users(), data.num_items(), 16, &InitConfig::default(), &mut rng(1))
            .unwrap();
    for x in &mut teacher.tensors[0].data {
        *x = r.gen_range(-1.0..1.0);
    }
    for x in &mut teacher.tensors[1].data {
        *x = r.gen_range(-1.0..1.0);
    }
    let mut records = Vec::new();
    distill_student(&data, &teacher, &base, &mut |rec| records.push(rec.clone())).unwrap();
    let targets_constant = records.windows(2).all(|w| w[0].targets_fingerprint == w[1].targets_fingerprint)
        && records[0].targets_fingerprint != 0;
    checks.push((
        targets_constant && records.len() == 12,
        format!("rrd targets hash-equal across {} epochs", records.len()),
    ));
    let cadence_ok = records.iter().enumerate().all(|(e, rec)| {
        let changed = e == 0 || rec.samples_fingerprint != records[e - 1].samples_fingerprint;
        rec.resampled == (e % 5 == 0) && changed == (e % 5 == 0)
    });
    let refreshed: Vec<usize> = records.iter().filter(|r| r.resampled).map(|r| r.epoch).collect();
    checks.push((cadence_ok, format!("correction samples refreshed at epochs {refreshed:?} only")));

    // split determinism
    let full = small_dataset(22);
    let a = full.leave_one_out_split(5, 3).unwrap();
    let b = full.leave_one_out_split(5, 3).unwrap();
    let again = a.leave_one_out_split(5, 3).unwrap();
    let other = full.leave_one_out_split(6, 3).unwrap();
    checks
        .push((a == b && a == again && a.split_assignments() != other.split_assignments(), "split determinism".into()));

    // transpose consistency: item-side correction on R equals user-side correction on Rᵀ
    let data = small_dataset(23);
    let flipped = transpose(&data);
    let init = InitConfig { embedding_std: 0.5, item_bias: false };
    let teacher = init_params(ModelKind::Bpr, data.num_users(), data.num_items(), 6, &init, &mut rng(2)).unwrap();
    let student = init_params(ModelKind::Bpr, data.num_users(), data.num_items(), 3, &init, &mut rng(3)).unwrap();
    let (teacher_t, student_t) = (transpose_params(&teacher), transpose_params(&student));
    let budget = CorrectionBudget { under: 8, over: 8 };
    let mut items_set = CorrectionSet::empty(Side::Item, data.num_items());
    let mut users_set = CorrectionSet::empty(Side::User, flipped.num_users());
    let mut rng_a = rng(77);
    let mut rng_b = rng(77);
    let mut samples_equal = true;
    for i in 0..data.num_items() {
        let pool = CandidatePool::exhaustive(&data, Side::Item, i);
        let pool_t = CandidatePool::exhaustive(&flipped, Side::User, i);
        samples_equal &= pool.candidates == pool_t.candidates;
        if pool.candidates.is_empty() {
            continue;
        }
        let s = sample_correction(
            &rank_candidates(&teacher, &pool).unwrap(),
            &rank_candidates(&student, &pool).unwrap(),
            1e-2,
            budget,
            SelectionRule::Sampled,
            0,
            &mut rng_a,
        )
        .unwrap();
        let st = sample_correction(
            &rank_candidates(&teacher_t, &pool_t).unwrap(),
            &rank_candidates(&student_t, &pool_t).unwrap(),
            1e-2,
            budget,
            SelectionRule::Sampled,
            0,
            &mut rng_b,
        )
        .unwrap();
        samples_equal &= s.under == st.under && s.over == st.over;
        items_set.samples[i] = Some(s);
        users_set.samples[i] = Some(st);
    }
    let batch = distinct(&mut r, data.num_items(), 20);
    let mut g = Gradients::zeros_like(&student);
    let mut gt = Gradients::zeros_like(&student_t);
    let l = icd_loss(&student, &items_set, &batch, 1.0, &mut g).unwrap();
    let lt = ucd_loss(&student_t, &users_set, &batch, 1.0, &mut gt).unwrap();
    let mut grad_diff: f64 = 0.0;
    for (t, tt) in [(0, 1), (1, 0)] {
        for k in 0..student.tensors[t].data.len() {
            grad_diff = grad_diff.max((g.get(t, k) - gt.get(tt, k)).abs());
        }
    }
    checks.push((
        samples_equal && (l - lt).abs() <= 1e-12 && grad_diff <= 1e-12,
        format!("transpose consistency (loss diff {:.1e}, grad diff {grad_diff:.1e})", (l - lt).abs()),
    ));

    all(checks)
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut failed = 0;
    let mut emit = |id: u32, name: &str, v: Verdict| {
        println!("[{}] {id} {name}: {}", if v.ok { "PASS" } else { "FAIL" }, v.detail);
        if !v.ok {
            failed += 1;
        }
    };
    emit(1, "relaxed probability oracle", relaxed_oracle());
    emit(2, "gradient suites", gradient_suites());
    emit(3, "discrepancy math", discrepancy_math());
    emit(4, "sampler proportionality", sampler_proportionality());
    emit(5, "metric correctness", metric_correctness());

    let t = Instant::now();
    let results = synthetic_experiment();
    for r in &results {
        let line: Vec<String> = Run::ALL.iter().map(|&run| format!("{} {:.4}", run.label(), r.get(run).hit5)).collect();
        println!("    seed {}: teacher {:.4}, {}", r.seed, r.teacher_hit5, line.join(", "));
    }
    println!("    synthetic experiment took {:.0}s", t.elapsed().as_secs_f64());
    emit(6, "synthetic end-to-end ordering", end_to_end(&results));
    emit(7, "discrepancy reduction", discrepancy_reduction(&results));
    emit(8, "ablation direction", ablation_direction(&results));
    emit(9, "invariant suites", invariants());

    println!("acceptance: {} of 9 criteria passed in {:.0}s", 9 - failed, started.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
