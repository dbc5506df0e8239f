use rankdistill_core::synth::{generate, SynthConfig};
use rankdistill_core::trainer::{distill_student, train_teacher, EpochRecord};
use rankdistill_core::{AblationMode, Error, InteractionDataset, Method, TrainConfig};

fn small() -> (InteractionDataset, TrainConfig) {
    let synth = SynthConfig {
        num_users: 40,
        num_items: 60,
        mean_interactions: 8,
        spread: 2,
        seed: 5,
        ..SynthConfig::default()
    };
    let data = generate(&synth).unwrap().leave_one_out_split(5, 3).unwrap();
    let config = TrainConfig {
        teacher_dim: 8,
        student_dim: 4,
        epochs: 7,
        patience: 100,
        learning_rate: 1e-2,
        init_std: 0.1,
        pool_teacher: 15,
        pool_student: 15,
        pool_random: 15,
        rrd_interesting: 8,
        rrd_uninteresting: 8,
        m_under: 6,
        m_over: 6,
        resample_period: 3,
        lambda_rrd: 0.5,
        lambda_ucd: 0.3,
        lambda_icd: 0.2,
        seed: 11,
        ..TrainConfig::default()
    };
    (data, config)
}

fn logged(run: impl FnOnce(&mut dyn FnMut(&EpochRecord))) -> Vec<EpochRecord> {
    let mut log = Vec::new();
    run(&mut |r| log.push(r.clone()));
    log
}

#[test]
fn total_is_the_weighted_sum_of_components() {
    let (data, config) = small();
    let teacher = train_teacher(&data, &config, &mut |_| {}).unwrap().params;
    for mode in AblationMode::ALL {
        let cfg = TrainConfig { ablation: mode, ..config.clone() };
        let o = cfg.objective();
        let log = logged(|obs| {
            distill_student(&data, &teacher, &cfg, obs).unwrap();
        });
        for r in &log {
            let sum = r.l_rs + o.rrd * r.l_rrd + o.rrd_item * r.l_rrd_item + o.ucd * r.l_ucd + o.icd * r.l_icd;
            assert!((r.total - sum).abs() <= 1e-9, "{mode}: epoch {} total {} vs {sum}", r.epoch, r.total);
        }
        // the terms a mode switches off are never computed
        assert!(log.iter().all(|r| (o.ucd > 0.0 || r.l_ucd == 0.0) && (o.icd > 0.0 || r.l_icd == 0.0)), "{mode}");
        assert!(log.iter().all(|r| o.rrd_item > 0.0 || r.l_rrd_item == 0.0), "{mode}");
    }
}

#[test]
fn identical_seeds_give_identical_runs() {
    let (data, config) = small();
    let teacher_a = train_teacher(&data, &config, &mut |_| {}).unwrap();
    let teacher_b = train_teacher(&data, &config, &mut |_| {}).unwrap();
    assert_eq!(teacher_a.params, teacher_b.params);
    assert_eq!(teacher_a.log, teacher_b.log);
    let a = distill_student(&data, &teacher_a.params, &config, &mut |_| {}).unwrap();
    let b = distill_student(&data, &teacher_a.params, &config, &mut |_| {}).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.log, b.log);
    assert_eq!(a.adam, b.adam);

    let other = distill_student(&data, &teacher_a.params, &TrainConfig { seed: 12, ..config }, &mut |_| {}).unwrap();
    assert_ne!(other.params, a.params);
}

#[test]
fn zero_weights_reduce_to_base_training() {
    let (data, config) = small();
    let teacher = train_teacher(&data, &config, &mut |_| {}).unwrap().params;
    let student_cfg = Method::Student.apply(config.clone());
    let distilled = distill_student(&data, &teacher, &student_cfg, &mut |_| {}).unwrap();
    // the same model trained without any teacher at all
    let plain =
        train_teacher(&data, &TrainConfig { teacher_dim: config.student_dim, ..student_cfg }, &mut |_| {}).unwrap();
    let losses = |r: &EpochRecord| (r.l_rs, r.l_rrd, r.l_rrd_item, r.l_ucd, r.l_icd, r.total, r.valid_hit5);
    let a: Vec<_> = distilled.log.epochs.iter().map(losses).collect();
    let b: Vec<_> = plain.log.epochs.iter().map(losses).collect();
    assert_eq!(a, b);
    assert_eq!(distilled.params, plain.params);
    assert!(distilled.log.epochs.iter().all(|r| r.total == r.l_rs));
}

#[test]
fn rrd_preset_leaves_correction_terms_out() {
    let (data, config) = small();
    let teacher = train_teacher(&data, &config, &mut |_| {}).unwrap().params;
    let rrd = distill_student(&data, &teacher, &Method::Rrd.apply(config.clone()), &mut |_| {}).unwrap();
    assert!(rrd.log.epochs.iter().all(|r| r.l_ucd == 0.0 && r.l_icd == 0.0 && r.l_rrd > 0.0));
}

#[test]
fn no_item_side_matches_full_when_icd_is_already_off() {
    let (data, config) = small();
    let teacher = train_teacher(&data, &config, &mut |_| {}).unwrap().params;
    let base = TrainConfig { lambda_icd: 0.0, ..config };
    let full = distill_student(&data, &teacher, &base, &mut |_| {}).unwrap();
    let ablated =
        distill_student(&data, &teacher, &TrainConfig { ablation: AblationMode::NoItemSide, ..base }, &mut |_| {})
            .unwrap();
    assert_eq!(full.params, ablated.params);
    assert_eq!(full.log, ablated.log);
}

#[test]
fn mismatched_teacher_is_rejected_before_training() {
    let (data, config) = small();
    let teacher = train_teacher(&data, &config, &mut |_| {}).unwrap().params;
    let synth = SynthConfig { num_users: 30, num_items: 60, mean_interactions: 8, spread: 2, ..SynthConfig::default() };
    let other = generate(&synth).unwrap().leave_one_out_split(5, 3).unwrap();
    let mut epochs = 0;
    let err = distill_student(&other, &teacher, &config, &mut |_| epochs += 1).err().unwrap();
    assert!(matches!(err, Error::DimensionMismatch(_)), "{err:?}");
    assert_eq!(epochs, 0);
}
