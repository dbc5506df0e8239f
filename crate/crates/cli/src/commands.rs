//! Subcommands.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rankdistill_core::dataset::Holdout;
use rankdistill_core::distill::CorrectionSet;
use rankdistill_core::eval::{avg_rank_discrepancy, evaluate, Metric};
use rankdistill_core::ranking::top_n;
use rankdistill_core::synth::{generate, SynthConfig};
use rankdistill_core::trainer::{distill_student, train_teacher, EpochRecord, TrainOutcome};
use rankdistill_core::{AblationMode, InteractionDataset, Method, Side, TrainConfig};
use serde::Serialize;

use crate::checkpoint::Checkpoint;
use crate::config;
use crate::digest::{dataset_fingerprint, split_fingerprint};
use crate::error::{CliResult, DataContext, Failure};
use crate::ingest::{load_path, write_interactions, Delimiter};
use crate::manifest::Manifest;
use crate::report::Report;
use crate::split::{apply_sidecar, write_sidecar};

#[derive(Debug, Parser)]
#[command(name = "rankdistill", version, about = "Ranking distillation for top-N recommenders")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read an interaction log, report counts and write it normalized.
    Ingest(IngestArgs),
    /// Hold out one validation and one test item per user.
    Split(SplitArgs),
    /// Train the teacher on the base loss.
    TrainTeacher(TrainArgs),
    /// Train a student from a teacher checkpoint.
    Distill(DistillArgs),
    /// Score a checkpoint on the test items.
    Evaluate(EvaluateArgs),
    /// Distill under every ablation mode and compare.
    Ablate(AblateArgs),
    /// Write a synthetic interaction log from a low-rank preference model.
    Synth(SynthArgs),
    /// Re-run a recorded command and check its artifacts hash the same.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Interaction log: `user<delim>item[<delim>...]` per line.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    pub delimiter: Delimiter,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Iteratively drop users with fewer interactions than this.
    #[arg(long, default_value_t = 1)]
    pub min_user_count: usize,
    /// Iteratively drop items with fewer interactions than this.
    #[arg(long, default_value_t = 1)]
    pub min_item_count: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub min_interactions: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Split sidecar. Without one, the data is split with the config seed and
    /// the sidecar is written to the output directory.
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// TOML file with `TrainConfig` keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DistillArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long)]
    pub teacher: PathBuf,
    /// `student`, `rrd` or `dcd`.
    #[arg(long, default_value = "dcd", value_parser = parse_method)]
    pub method: Method,
    /// `full`, `no_correction`, `no_item_side`, `no_user_side` or `no_sampling`.
    #[arg(long, value_parser = parse_ablation)]
    pub ablation: Option<AblationMode>,
    /// Write the final correction samples here.
    #[arg(long)]
    pub dump_samples: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub split: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Teacher checkpoint; adds user- and item-side rank discrepancy.
    #[arg(long)]
    pub teacher: Option<PathBuf>,
    /// Teacher top-K used by the discrepancy diagnostic.
    #[arg(long, default_value_t = 50)]
    pub discrepancy_k: usize,
    #[arg(long, value_delimiter = ',', default_value = "5,10")]
    pub metric_n: Vec<usize>,
    /// Reports to compare against with a paired t-test.
    #[arg(long)]
    pub compare: Vec<PathBuf>,
    #[arg(long, default_value = "H@5", value_parser = parse_metric)]
    pub compare_metric: Metric,
    /// Label for the report; defaults to the checkpoint's role.
    #[arg(long)]
    pub method: Option<String>,
    /// Write each user's top-N list (largest N) here.
    #[arg(long)]
    pub dump_rankings: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long)]
    pub teacher: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "5,10")]
    pub metric_n: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 300)]
    pub users: usize,
    #[arg(long, default_value_t = 500)]
    pub items: usize,
    #[arg(long, default_value_t = 8)]
    pub rank: usize,
    /// Mean interactions per user.
    #[arg(long, default_value_t = 20)]
    pub interactions: usize,
    /// Interactions per user vary uniformly by up to this much.
    #[arg(long, default_value_t = 5)]
    pub spread: usize,
    #[arg(long, default_value_t = 2.0)]
    pub sharpness: f64,
    #[arg(long, default_value_t = 0.5)]
    pub popularity_std: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Fresh output directory for the re-run.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: rankdistill_core::Error| e.to_string())
}

fn parse_ablation(s: &str) -> Result<AblationMode, String> {
    s.parse().map_err(|e: rankdistill_core::Error| e.to_string())
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse().map_err(|e: rankdistill_core::Error| e.to_string())
}

/// Everything a command reads besides its flags.
pub struct Context {
    /// Arguments after the program name, recorded in manifests.
    pub args: Vec<String>,
    /// `RANKDISTILL_*` overrides.
    pub env: Vec<(String, String)>,
}

pub fn run(cli: Cli, ctx: &Context) -> CliResult<()> {
    match cli.command {
        Command::Ingest(a) => ingest(a, ctx),
        Command::Split(a) => split(a, ctx),
        Command::TrainTeacher(a) => teacher(a, ctx),
        Command::Distill(a) => distill(a, ctx),
        Command::Evaluate(a) => evaluate_cmd(a, ctx),
        Command::Ablate(a) => ablate(a, ctx),
        Command::Synth(a) => synth(a),
        Command::Replay(a) => replay(a),
    }
}

fn create_dir(out: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out).data_ctx(format!("creating {}", out.display()))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    std::fs::write(path, contents).data_ctx(format!("writing {}", path.display()))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> CliResult<()> {
    let file = File::create(path).data_ctx(format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).data_ctx(format!("writing {}", path.display()))
}

fn ingest(a: IngestArgs, ctx: &Context) -> CliResult<()> {
    let started = Instant::now();
    let (raw, mut stats) = load_path(&a.data.data, a.data.delimiter)?;
    let dataset = raw.min_count_filter(a.min_user_count, a.min_item_count)?;
    stats.filtered_out = raw.num_interactions() - dataset.num_interactions();
    stats.users = dataset.num_users();
    stats.items = dataset.num_items();
    stats.interactions = dataset.num_interactions();
    create_dir(&a.out)?;
    let mut m = Manifest::new("ingest", ctx.args.clone());
    m.dataset_fingerprint = dataset_fingerprint(&dataset);
    let data_path = a.out.join("interactions.tsv");
    write_with(&data_path, |w| write_interactions(&dataset, w))?;
    m.artifact(&a.out, &data_path)?;
    let stats_path = a.out.join("ingest.json");
    write_file(&stats_path, serde_json::to_string_pretty(&stats).expect("stats serialize") + "\n")?;
    m.artifact(&a.out, &stats_path)?;
    m.timings_s.insert("total".into(), started.elapsed().as_secs_f64());
    m.write(&a.out)?;
    println!(
        "{} users, {} items, {} interactions ({} records, {} duplicates dropped, {} below min counts)",
        stats.users, stats.items, stats.interactions, stats.records, stats.duplicates, stats.filtered_out
    );
    Ok(())
}

fn split(a: SplitArgs, ctx: &Context) -> CliResult<()> {
    let started = Instant::now();
    let (dataset, _) = load_path(&a.data.data, a.data.delimiter)?;
    let split = dataset.leave_one_out_split(a.seed, a.min_interactions)?;
    create_dir(&a.out)?;
    let mut m = Manifest::new("split", ctx.args.clone());
    m.dataset_fingerprint = dataset_fingerprint(&dataset);
    m.split_fingerprint = Some(split_fingerprint(&split));
    m.seeds = vec![a.seed];
    let path = a.out.join("split.tsv");
    write_with(&path, |w| write_sidecar(&split, w))?;
    m.artifact(&a.out, &path)?;
    m.timings_s.insert("total".into(), started.elapsed().as_secs_f64());
    m.write(&a.out)?;
    println!("{} users split, sidecar at {}", split.split_assignments().len(), path.display());
    Ok(())
}

/// Dataset, config and manifest shared by the training commands.
struct Prepared {
    dataset: InteractionDataset,
    fingerprint: String,
    config: TrainConfig,
    manifest: Manifest,
}

fn prepare(a: &TrainArgs, command: &str, ctx: &Context) -> CliResult<Prepared> {
    let mut config = config::resolve(a.config.as_deref(), ctx.env.clone())?;
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    let (raw, _) = load_path(&a.data.data, a.data.delimiter)?;
    let fingerprint = dataset_fingerprint(&raw);
    create_dir(&a.out)?;
    let mut manifest = Manifest::new(command, ctx.args.clone());
    let dataset = match &a.split {
        Some(path) => apply_sidecar(&raw, path)?,
        None => {
            let split = raw.leave_one_out_split(config.seed, config.min_interactions)?;
            let path = a.out.join("split.tsv");
            write_with(&path, |w| write_sidecar(&split, w))?;
            manifest.artifact(&a.out, &path)?;
            split
        }
    };
    manifest.dataset_fingerprint = fingerprint.clone();
    manifest.split_fingerprint = Some(split_fingerprint(&dataset));
    manifest.seeds = vec![config.seed];
    manifest.config = Some(config::snapshot(&config));
    Ok(Prepared { dataset, fingerprint, config, manifest })
}

#[derive(Serialize)]
struct LogLine {
    epoch: usize,
    l_rs: f64,
    l_rrd: f64,
    l_rrd_item: f64,
    l_ucd: f64,
    l_icd: f64,
    total: f64,
    valid_h5: f64,
    valid_m5: f64,
    resampled: bool,
    wall_time_s: f64,
}

/// Runs `train` while streaming its epoch records to `path` as JSON lines.
fn with_log(
    path: &Path,
    train: impl FnOnce(&mut dyn FnMut(&EpochRecord)) -> rankdistill_core::Result<TrainOutcome>,
) -> CliResult<TrainOutcome> {
    let file = File::create(path).data_ctx(format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    let mut io_error = None;
    let started = Instant::now();
    let outcome = train(&mut |r: &EpochRecord| {
        let line = LogLine {
            epoch: r.epoch,
            l_rs: r.l_rs,
            l_rrd: r.l_rrd,
            l_rrd_item: r.l_rrd_item,
            l_ucd: r.l_ucd,
            l_icd: r.l_icd,
            total: r.total,
            valid_h5: r.valid_hit5,
            valid_m5: r.valid_mrr5,
            resampled: r.resampled,
            wall_time_s: started.elapsed().as_secs_f64(),
        };
        if io_error.is_none() {
            let text = serde_json::to_string(&line).expect("log line serializes");
            if let Err(e) = writeln!(w, "{text}") {
                io_error = Some(e);
            }
        }
    });
    w.flush().data_ctx(format!("writing {}", path.display()))?;
    if let Some(e) = io_error {
        return Err(Failure::Data(anyhow::Error::from(e).context(format!("writing {}", path.display()))));
    }
    Ok(outcome?)
}

fn teacher(a: TrainArgs, ctx: &Context) -> CliResult<()> {
    let started = Instant::now();
    let Prepared { dataset, fingerprint, config, mut manifest } = prepare(&a, "train-teacher", ctx)?;
    let log_path = a.out.join("train_log.jsonl");
    let outcome = with_log(&log_path, |obs| train_teacher(&dataset, &config, obs))?;
    manifest.log(&a.out, &log_path);
    let ck = Checkpoint::new("teacher", config.seed, fingerprint, outcome.params, Some(outcome.adam));
    let ck_path = a.out.join("teacher.ckpt.json");
    write_file(&ck_path, ck.to_json())?;
    manifest.checkpoint(&a.out, &ck_path)?;
    manifest.timings_s.insert("total".into(), started.elapsed().as_secs_f64());
    manifest.write(&a.out)?;
    println!(
        "teacher: best epoch {} of {}, checkpoint {}",
        outcome.log.best_epoch,
        outcome.log.epochs.len(),
        ck_path.display()
    );
    Ok(())
}

fn load_teacher(path: &Path, dataset: &InteractionDataset, fingerprint: &str) -> CliResult<Checkpoint> {
    let ck = Checkpoint::load(path)?;
    ck.check_against(dataset, fingerprint).map_err(|e| e.context(format!("teacher {}", path.display())))?;
    Ok(ck)
}

fn role(method: Method, ablation: AblationMode) -> String {
    match (method, ablation) {
        (_, AblationMode::Full) => method.as_str().to_string(),
        (_, mode) => format!("{}:{mode}", method.as_str()),
    }
}

fn distill(a: DistillArgs, ctx: &Context) -> CliResult<()> {
    let started = Instant::now();
    let Prepared { dataset, fingerprint, config, mut manifest } = prepare(&a.train, "distill", ctx)?;
    let teacher = load_teacher(&a.teacher, &dataset, &fingerprint)?;
    let mut config = a.method.apply(config);
    if let Some(mode) = a.ablation {
        config.ablation = mode;
    }
    manifest.config = Some(config::snapshot(&config));
    let out = &a.train.out;
    let log_path = out.join("train_log.jsonl");
    let outcome = with_log(&log_path, |obs| distill_student(&dataset, &teacher.params, &config, obs))?;
    manifest.log(out, &log_path);
    let role = role(a.method, config.ablation);
    if let Some(path) = &a.dump_samples {
        write_with(path, |w| write_samples(&dataset, &config, outcome.corrections.as_ref(), w))?;
        if path.starts_with(out) {
            manifest.artifact(out, path)?;
        }
    }
    let ck = Checkpoint::new(&role, config.seed, fingerprint, outcome.params, Some(outcome.adam));
    let ck_path = out.join("student.ckpt.json");
    write_file(&ck_path, ck.to_json())?;
    manifest.checkpoint(out, &ck_path)?;
    manifest.timings_s.insert("total".into(), started.elapsed().as_secs_f64());
    manifest.write(out)?;
    println!(
        "{role}: best epoch {} of {}, checkpoint {}",
        outcome.log.best_epoch,
        outcome.log.epochs.len(),
        ck_path.display()
    );
    Ok(())
}

/// One line per anchor: `<side> <anchor>: under=<ids>; over=<ids>`, raw ids,
/// `under` in teacher order.
fn write_samples(
    dataset: &InteractionDataset,
    config: &TrainConfig,
    corrections: Option<&(CorrectionSet, CorrectionSet)>,
    w: &mut impl Write,
) -> std::io::Result<()> {
    let selection = match config.objective().rule {
        rankdistill_core::distill::SelectionRule::Sampled => "sampled",
        rankdistill_core::distill::SelectionRule::Deterministic => "deterministic",
    };
    writeln!(w, "# selection: {selection}")?;
    let Some((users, items)) = corrections else {
        return Ok(());
    };
    for set in [users, items] {
        let (anchors, others) = (dataset.ids(set.side), dataset.ids(set.side.flip()));
        let join = |ids: &[usize]| ids.iter().map(|&c| others.raw(c).unwrap_or_default()).collect::<Vec<_>>().join(",");
        for s in set.samples.iter().flatten() {
            writeln!(
                w,
                "{} {} @{}: under={}; over={}",
                set.side.as_str(),
                anchors.raw(s.anchor).unwrap_or_default(),
                s.epoch,
                join(&s.under),
                join(&s.over)
            )?;
        }
    }
    Ok(())
}

fn evaluate_cmd(a: EvaluateArgs, ctx: &Context) -> CliResult<()> {
    let started = Instant::now();
    if a.metric_n.is_empty() || a.metric_n.contains(&0) {
        return Err(Failure::usage("--metric-n needs positive cutoffs"));
    }
    let (raw, _) = load_path(&a.data.data, a.data.delimiter)?;
    let fingerprint = dataset_fingerprint(&raw);
    let dataset = apply_sidecar(&raw, &a.split)?;
    let split_fp = split_fingerprint(&dataset);
    let ck = Checkpoint::load(&a.checkpoint)?;
    ck.check_against(&dataset, &fingerprint)?;
    let metrics = evaluate(&ck.params, &dataset, Holdout::Test, &a.metric_n)?;
    let method = a.method.clone().unwrap_or_else(|| ck.role.clone());
    let mut report = Report::new(&method, ck.seed, &dataset, fingerprint.clone(), split_fp.clone(), &metrics);
    if let Some(path) = &a.teacher {
        let teacher = load_teacher(path, &dataset, &fingerprint)?;
        report.discrepancy_user =
            Some(avg_rank_discrepancy(&teacher.params, &ck.params, &dataset, Side::User, a.discrepancy_k)?);
        report.discrepancy_item =
            Some(avg_rank_discrepancy(&teacher.params, &ck.params, &dataset, Side::Item, a.discrepancy_k)?);
    }
    for path in &a.compare {
        let other = Report::load(path)?;
        let label = format!("{} ({})", other.method, path.display());
        report.comparisons.push(report.compare(&other, &label, a.compare_metric)?);
    }

    create_dir(&a.out)?;
    let mut m = Manifest::new("evaluate", ctx.args.clone());
    m.dataset_fingerprint = fingerprint;
    m.split_fingerprint = Some(split_fp);
    m.seeds = vec![ck.seed];
    let json_path = a.out.join("report.json");
    write_file(&json_path, report.to_json())?;
    m.report(&a.out, &json_path)?;
    let csv_path = a.out.join("report.csv");
    write_file(&csv_path, report.to_csv())?;
    m.artifact(&a.out, &csv_path)?;
    if let Some(path) = &a.dump_rankings {
        let n = *a.metric_n.iter().max().expect("non-empty");
        write_with(path, |w| {
            for u in 0..dataset.num_users() {
                let top = top_n(&ck.params, &dataset, u, n).map_err(std::io::Error::other)?;
                let ids: Vec<&str> = top.iter().map(|&i| dataset.item_ids().raw(i).unwrap_or_default()).collect();
                writeln!(w, "{}: {}", dataset.user_ids().raw(u).unwrap_or_default(), ids.join(","))?;
            }
            Ok(())
        })?;
        if path.starts_with(&a.out) {
            m.artifact(&a.out, path)?;
        }
    }
    m.timings_s.insert("total".into(), started.elapsed().as_secs_f64());
    m.write(&a.out)?;

    let summary: Vec<String> = report.metrics.iter().map(|(k, v)| format!("{k} {v:.4}")).collect();
    println!("{method}: {}", summary.join(", "));
    if let (Some(u), Some(i)) = (report.discrepancy_user, report.discrepancy_item) {
        println!("discrepancy: user {u:.3}, item {i:.3}");
    }
    for c in &report.comparisons {
        println!("vs {}: {} diff {:+.4}, p = {:.4}", c.against, c.metric, c.mean_diff, c.p_value);
    }
    Ok(())
}

fn ablate(a: AblateArgs, ctx: &Context) -> CliResult<()> {
    let started = Instant::now();
    let Prepared { dataset, fingerprint, config, mut manifest } = prepare(&a.train, "ablate", ctx)?;
    let teacher = load_teacher(&a.teacher, &dataset, &fingerprint)?;
    let out = a.train.out.clone();
    let split_fp = split_fingerprint(&dataset);

    // one worker per mode, each writing only inside its own directory
    let results: Vec<CliResult<Report>> = std::thread::scope(|scope| {
        let handles: Vec<_> = AblationMode::ALL
            .iter()
            .map(|&mode| {
                let (dataset, teacher, config, fingerprint, split_fp, out) =
                    (&dataset, &teacher, &config, &fingerprint, &split_fp, &out);
                let ns = &a.metric_n;
                scope.spawn(move || -> CliResult<Report> {
                    let dir = out.join(mode.as_str());
                    create_dir(&dir)?;
                    let cfg = TrainConfig { ablation: mode, ..config.clone() };
                    let outcome = with_log(&dir.join("train_log.jsonl"), |obs| {
                        distill_student(dataset, &teacher.params, &cfg, obs)
                    })?;
                    let role = role(Method::Dcd, mode);
                    let metrics = evaluate(&outcome.params, dataset, Holdout::Test, ns)?;
                    let mut report =
                        Report::new(&role, cfg.seed, dataset, fingerprint.clone(), split_fp.clone(), &metrics);
                    report.discrepancy_user =
                        Some(avg_rank_discrepancy(&teacher.params, &outcome.params, dataset, Side::User, 50)?);
                    report.discrepancy_item =
                        Some(avg_rank_discrepancy(&teacher.params, &outcome.params, dataset, Side::Item, 50)?);
                    let ck = Checkpoint::new(&role, cfg.seed, fingerprint.clone(), outcome.params, Some(outcome.adam));
                    write_file(&dir.join("student.ckpt.json"), ck.to_json())?;
                    Ok(report)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut reports = Vec::new();
    for (mode, r) in AblationMode::ALL.iter().zip(results) {
        reports.push(r.map_err(|e| e.context(format!("ablation {mode}")))?);
    }
    let full = reports[0].clone();
    let metric = Metric::Hit(a.metric_n[0]);
    for r in reports.iter_mut().skip(1) {
        let c = r.compare(&full, &full.method, metric)?;
        r.comparisons.push(c);
    }
    for (mode, r) in AblationMode::ALL.iter().zip(&reports) {
        let dir = out.join(mode.as_str());
        let json_path = dir.join("report.json");
        write_file(&json_path, r.to_json())?;
        manifest.checkpoint(&out, &dir.join("student.ckpt.json"))?;
        manifest.report(&out, &json_path)?;
        manifest.log(&out, &dir.join("train_log.jsonl"));
    }

    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(full.csv_header()).expect("in-memory write");
    for r in &reports {
        csv.write_record(r.csv_row()).expect("in-memory write");
    }
    let table_path = out.join("comparison.csv");
    write_file(&table_path, csv.into_inner().expect("in-memory flush"))?;
    manifest.artifact(&out, &table_path)?;
    let md = comparison_markdown(&reports);
    let md_path = out.join("comparison.md");
    write_file(&md_path, &md)?;
    manifest.artifact(&out, &md_path)?;
    manifest.timings_s.insert("total".into(), started.elapsed().as_secs_f64());
    manifest.write(&out)?;
    print!("{md}");
    Ok(())
}

fn comparison_markdown(reports: &[Report]) -> String {
    let labels: Vec<String> = reports[0].metrics.keys().cloned().collect();
    let mut s = format!("| mode | {} | disc. user | disc. item | p vs full |\n", labels.join(" | "));
    s += &format!("|---|{}---|---|---|\n", "---|".repeat(labels.len()));
    for r in reports {
        let values: Vec<String> = labels.iter().map(|k| format!("{:.4}", r.metrics[k])).collect();
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2}"));
        let p = r.comparisons.first().map_or("-".to_string(), |c| format!("{:.4}", c.p_value));
        s += &format!(
            "| {} | {} | {} | {} | {p} |\n",
            r.method,
            values.join(" | "),
            opt(r.discrepancy_user),
            opt(r.discrepancy_item)
        );
    }
    s
}

fn synth(a: SynthArgs) -> CliResult<()> {
    let cfg = SynthConfig {
        num_users: a.users,
        num_items: a.items,
        rank: a.rank,
        mean_interactions: a.interactions,
        spread: a.spread,
        sharpness: a.sharpness,
        popularity_std: a.popularity_std,
        seed: a.seed,
    };
    let dataset = generate(&cfg)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_with(&a.out, |w| {
        writeln!(w, "# synthetic: {} users, {} items, rank {}, seed {}", a.users, a.items, a.rank, a.seed)?;
        write_interactions(&dataset, w)
    })?;
    println!("{} interactions written to {}", dataset.num_interactions(), a.out.display());
    Ok(())
}

fn replay(a: ReplayArgs) -> CliResult<()> {
    let recorded = Manifest::load(&a.manifest)?;
    if recorded.command == "replay" {
        return Err(Failure::usage("a replay manifest cannot be replayed"));
    }
    let mut args = recorded.args.clone();
    set_flag(&mut args, "--out", &a.out.to_string_lossy());
    create_dir(&a.out)?;
    if let Some(snapshot) = &recorded.config {
        let path = a.out.join("config.snapshot.toml");
        write_file(&path, snapshot)?;
        set_flag(&mut args, "--config", &path.to_string_lossy());
    }
    let cli = Cli::try_parse_from(std::iter::once("rankdistill".to_string()).chain(args.iter().cloned()))
        .map_err(|e| Failure::usage(format!("recorded arguments no longer parse: {e}")))?;
    // the snapshot already holds every override
    run(cli, &Context { args, env: Vec::new() })?;
    let fresh = Manifest::load(&a.out.join("manifest.json"))?;
    let mismatched: Vec<&String> = recorded
        .artifacts
        .iter()
        .filter(|(path, hash)| fresh.artifacts.get(*path) != Some(hash))
        .map(|(path, _)| path)
        .collect();
    if !mismatched.is_empty() {
        return Err(Failure::data(format!("replayed artifacts differ: {mismatched:?}")));
    }
    println!("replay reproduced {} artifacts", recorded.artifacts.len());
    Ok(())
}

/// Replaces the value of `flag` in `args`, appending it when absent.
fn set_flag(args: &mut Vec<String>, flag: &str, value: &str) {
    let prefix = format!("{flag}=");
    if let Some(k) = args.iter().position(|x| x == flag) {
        if k + 1 < args.len() {
            args[k + 1] = value.to_string();
            return;
        }
        args.truncate(k);
    } else if let Some(k) = args.iter().position(|x| x.starts_with(&prefix)) {
        args[k] = format!("{prefix}{value}");
        return;
    }
    args.push(flag.to_string());
    args.push(value.to_string());
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_flag_variants() {
        let mut a = vec!["x".to_string(), "--out".into(), "a".into()];
        set_flag(&mut a, "--out", "b");
        assert_eq!(a, ["x", "--out", "b"]);
        let mut a = vec!["--out=a".to_string()];
        set_flag(&mut a, "--out", "b");
        assert_eq!(a, ["--out=b"]);
        let mut a = vec!["x".to_string()];
        set_flag(&mut a, "--config", "c");
        assert_eq!(a, ["x", "--config", "c"]);
    }

    #[test]
    fn roles() {
        assert_eq!(role(Method::Dcd, AblationMode::Full), "dcd");
        assert_eq!(role(Method::Dcd, AblationMode::NoSampling), "dcd:no_sampling");
    }
}
