//! One function per CLI verb. Each writes its human-readable output to
//! `out` and returns a structured summary for callers and tests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stepfix::dataset::{
    curate, export_records, load_problems, load_submissions, read_records, split_problems, CurationOutput,
    ProblemMeta, RepairRecord, RuleSet, StripTags,
};
use stepfix::evaluation::{stratify, PassAtKReport, SampleBatch, REPORTED_KS};
use stepfix::repair_loop::{repair_batch, Critic, ProblemContext, RepairInput};
use stepfix::reward::{
    pairwise_accuracy, train_ranker, ComparisonBatch, FeatureConfig, JudgedProgram, LossKind, RankerParams,
    TrainConfig, TrainLogEntry,
};
use stepfix::rl_toy::{evaluate_policy, train_policy, write_curve_csv, EvalStats, RepairEnv, SoftmaxPolicy};
use stepfix::sandbox::{LanguageProfile, Sandbox, SuiteRunner, SuiteVerdict};
use stepfix::Status;

use crate::actors::build_actor;
use crate::config::{CriticBackend, HarnessConfig};
use crate::critics::{OracleCritic, RankerCritic};
use crate::store::{TrajectoryLog, TrajectoryStore};
use crate::CliError;

fn sandbox(cfg: &HarnessConfig) -> Sandbox {
    // Repairs already run `parallelism` at a time; keep per-suite fan-out small.
    Sandbox::new(LanguageProfile::python3()).with_workers(if cfg.parallelism > 1 { 1 } else { 4 })
}

fn problems(cfg: &HarnessConfig) -> Result<BTreeMap<String, ProblemMeta>, CliError> {
    Ok(load_problems(&cfg.paths.problems, &StripTags)?)
}

/// Apply `f` to every item with up to `workers` threads, keeping order.
fn par_map<T: Sync, U: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> U + Sync) -> Vec<U> {
    let workers = workers.max(1).min(items.len());
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<U>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(i) else { break };
                *slots[i].lock().expect("slot") = Some(f(item));
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot").expect("filled"))
        .collect()
}

fn context(meta: &ProblemMeta) -> ProblemContext {
    ProblemContext {
        problem_id: meta.problem_id.clone(),
        description: meta.description.clone(),
        time_limit_ms: meta.time_limit_ms,
        memory_bytes: meta.memory_bytes,
        // The first test doubles as the public sample.
        sample_tests: meta.tests.iter().take(1).cloned().collect(),
    }
}

// ---------------------------------------------------------------- repair

#[derive(Debug, Clone)]
pub struct RepairArgs {
    pub run_id: String,
    /// Defaults to `paths.corpus`.
    pub corpus: Option<PathBuf>,
    /// Records used per problem, in corpus order.
    pub records_per_problem: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairSummary {
    pub trajectories: usize,
    /// Items whose loop could not start.
    pub failed: usize,
    /// Records skipped because the oracle has no tests for their problem.
    pub skipped: usize,
    pub summary_csv: String,
    pub run_dir: PathBuf,
}

pub fn cmd_repair(cfg: &HarnessConfig, args: &RepairArgs, out: &mut dyn Write) -> Result<RepairSummary, CliError> {
    let problems = problems(cfg)?;
    let corpus = args.corpus.clone().unwrap_or_else(|| cfg.paths.corpus.clone());
    let records = read_records(&corpus)?;
    // Build the actor first: a remote actor without its token fails here.
    let actor = build_actor(cfg)?;
    let sandbox = sandbox(cfg);
    let critic: Box<dyn Critic + '_> = match &cfg.critic {
        CriticBackend::Oracle => Box::new(OracleCritic::new(&sandbox, &problems)),
        CriticBackend::LearnedRanker { path } => Box::new(RankerCritic::load(path)?),
    };
    let needs_tests = matches!(cfg.critic, CriticBackend::Oracle);

    let n = cfg.samples_per_problem;
    let mut used: BTreeMap<&str, usize> = BTreeMap::new();
    let mut inputs = Vec::new();
    let mut skipped = 0;
    for record in &records {
        let Some(first) = record.versions.first() else { continue };
        let Some(meta) = problems.get(&record.problem_id) else {
            skipped += 1;
            continue;
        };
        if needs_tests && meta.tests.is_empty() {
            skipped += 1;
            continue;
        }
        let ordinal = used.entry(&record.problem_id).or_default();
        if *ordinal >= args.records_per_problem {
            continue;
        }
        for s in 0..n {
            inputs.push(RepairInput {
                program: first.source.clone(),
                problem: context(meta),
                sample_index: *ordinal * n + s,
            });
        }
        *ordinal += 1;
    }

    let results = repair_batch(&inputs, actor.as_ref(), critic.as_ref(), &cfg.loop_cfg, cfg.parallelism);
    let store = TrajectoryStore::new(&cfg.paths.runs);
    let mut csv = String::from("problem_id,sample,steps,returned_index,exit_reason,initial_reward,returned_reward\n");
    let mut failed = 0;
    let mut exits: BTreeMap<String, usize> = BTreeMap::new();
    let (mut gain, mut started) = (0.0, 0usize);
    for (input, result) in inputs.iter().zip(results) {
        let (trajectory, error) = match result {
            Ok(t) => (Some(t), None),
            Err(e) => (None, Some(e.to_string())),
        };
        match &trajectory {
            Some(t) => {
                let exit = format!("{:?}", t.exit_reason);
                let (r0, rr) = (t.steps[0].reward, t.returned().reward);
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{exit},{r0:.4},{rr:.4}",
                    input.problem.problem_id,
                    input.sample_index,
                    t.steps.len(),
                    t.returned_index
                );
                *exits.entry(exit).or_default() += 1;
                gain += rr - r0;
                started += 1;
            }
            None => {
                failed += 1;
                let _ = writeln!(csv, "{},{},0,0,Failed,,", input.problem.problem_id, input.sample_index);
            }
        }
        store.append(&TrajectoryLog {
            run_id: args.run_id.clone(),
            problem_id: input.problem.problem_id.clone(),
            sample_index: input.sample_index,
            initial_program: input.program.clone(),
            trajectory,
            error,
        })?;
    }
    store.write_file(&args.run_id, "summary.csv", &csv)?;

    writeln!(out, "run {}: {} trajectories, {failed} failed to start, {skipped} records skipped", args.run_id, inputs.len())?;
    for (exit, count) in &exits {
        writeln!(out, "  exit {exit:<14} {count:>6}")?;
    }
    if started > 0 {
        writeln!(out, "  mean reward gain {:.4}", gain / started as f64)?;
    }
    Ok(RepairSummary {
        trajectories: inputs.len(),
        failed,
        skipped,
        summary_csv: csv,
        run_dir: store.run_dir(&args.run_id),
    })
}

// ----------------------------------------------------------------- judge

/// Judge one program and print the verdict with a per-test table.
pub fn cmd_judge(cfg: &HarnessConfig, program: &Path, problem_id: &str, out: &mut dyn Write) -> Result<SuiteVerdict, CliError> {
    let problems = problems(cfg)?;
    let meta = problems
        .get(problem_id)
        .ok_or_else(|| CliError::UnknownProblem(problem_id.to_string()))?;
    let source = fs::read_to_string(program)?;
    let verdict = judge_source(cfg, &source, meta)?;
    write_verdict(&verdict, out)?;
    Ok(verdict)
}

pub fn judge_source(cfg: &HarnessConfig, source: &str, meta: &ProblemMeta) -> Result<SuiteVerdict, CliError> {
    if meta.tests.is_empty() {
        return Err(CliError::Config(format!("problem `{}` has no tests", meta.problem_id)));
    }
    Ok(sandbox(cfg).run_suite(source, &meta.tests, &meta.limits()?)?)
}

fn write_verdict(v: &SuiteVerdict, out: &mut dyn Write) -> Result<(), CliError> {
    writeln!(out, "status: {}", v.status.code())?;
    if let Some(diag) = &v.compile_diagnostic {
        writeln!(out, "{}", diag.trim_end())?;
    }
    if !v.outcomes.is_empty() {
        writeln!(out, "{:<10} {:<6} {:>8} {:>10}", "test", "status", "cpu_ms", "peak_kib")?;
        for o in &v.outcomes {
            writeln!(
                out,
                "{:<10} {:<6} {:>8} {:>10}",
                o.test_id,
                o.status.code(),
                o.cpu_time_ms,
                o.peak_memory_bytes >> 10
            )?;
        }
    }
    Ok(())
}

// -------------------------------------------------------------- train-rm

#[derive(Debug, Clone, Default)]
pub struct TrainRmArgs {
    pub corpus: Option<PathBuf>,
    /// Parameter file; `<reports>/ranker.txt` by default. The log goes next
    /// to it with a `.log.csv` suffix.
    pub out: Option<PathBuf>,
    pub loss: Option<LossKind>,
}

#[derive(Debug, Clone)]
pub struct TrainRmSummary {
    pub log: Vec<TrainLogEntry>,
    pub params_path: PathBuf,
    pub log_path: PathBuf,
    pub train_accuracy: f64,
}

/// Per-problem pools of distinct judged programs from the corpus.
pub fn program_pools(records: &[RepairRecord]) -> BTreeMap<String, Vec<JudgedProgram>> {
    let mut pools: BTreeMap<String, Vec<JudgedProgram>> = BTreeMap::new();
    for r in records {
        let pool = pools.entry(r.problem_id.clone()).or_default();
        for v in &r.versions {
            if !pool.iter().any(|p| p.source == v.source) {
                pool.push(JudgedProgram::new(v.source.clone(), v.status));
            }
        }
    }
    pools
}

pub fn cmd_train_rm(cfg: &HarnessConfig, args: &TrainRmArgs, out: &mut dyn Write) -> Result<TrainRmSummary, CliError> {
    let t = &cfg.train_rm;
    let corpus = args.corpus.clone().unwrap_or_else(|| cfg.paths.corpus.clone());
    let pools = program_pools(&read_records(&corpus)?);
    let descriptions: BTreeMap<String, String> = match problems(cfg) {
        Ok(p) => p.into_iter().map(|(id, m)| (id, m.description)).collect(),
        Err(_) => BTreeMap::new(),
    };
    let eligible: Vec<(&String, &Vec<JudgedProgram>)> = pools
        .iter()
        .filter(|(_, pool)| {
            let first = pool[0].status.rank();
            pool.iter().any(|p| p.status.rank() != first)
        })
        .collect();
    if eligible.is_empty() {
        return Err(stepfix::reward::RewardError::Training(
            "no problem has programs with two different status ranks".into(),
        )
        .into());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let batches: Vec<ComparisonBatch> = (0..t.steps * t.batch_size)
        .map(|_| {
            let (id, pool) = *eligible.choose(&mut rng).expect("non-empty");
            let mut batch = ComparisonBatch::sample(id, pool, t.k, &mut rng);
            batch.context = descriptions.get(id).cloned();
            batch
        })
        .collect();
    let train_cfg = TrainConfig {
        loss: args.loss.unwrap_or(t.loss),
        learning_rate: t.learning_rate,
        steps: t.steps,
        batch_size: t.batch_size,
        seed: cfg.seed,
    };
    let features = FeatureConfig {
        hash_dim: t.hash_dim,
        ..FeatureConfig::default()
    };
    let (params, log) = train_ranker(&batches, &train_cfg, RankerParams::zeros(features))?;
    let train_accuracy = pairwise_accuracy(&params, &batches);

    let params_path = args.out.clone().unwrap_or_else(|| cfg.paths.reports.join("ranker.txt"));
    if let Some(dir) = params_path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(&params_path)?);
    params.write_to(&mut w)?;
    w.flush()?;
    let log_path = params_path.with_extension("log.csv");
    let mut csv = String::from("step,loss,comparisons,ordered_pairs\n");
    for e in &log {
        let _ = writeln!(csv, "{},{:.6},{},{}", e.step, e.loss, e.comparisons, e.pair_count);
    }
    fs::write(&log_path, csv)?;

    writeln!(
        out,
        "training {:?} loss, k={} batch={} over {} problems",
        train_cfg.loss,
        t.k,
        t.batch_size,
        eligible.len()
    )?;
    for e in log.iter().filter(|e| e.step % 10 == 0 || e.step + 1 == log.len()) {
        writeln!(
            out,
            "step {:>4}: loss {:.4}, {} comparisons, {} ordered pairs",
            e.step, e.loss, e.comparisons, e.pair_count
        )?;
    }
    writeln!(out, "training pairwise accuracy {:.4}", train_accuracy)?;
    writeln!(out, "wrote {}", params_path.display())?;
    Ok(TrainRmSummary {
        log,
        params_path,
        log_path,
        train_accuracy,
    })
}

// -------------------------------------------------------------- evaluate

#[derive(Debug, Clone)]
pub struct EvaluateOutcome {
    pub report: PassAtKReport,
    /// Problems left out because they have no tests or metadata.
    pub excluded: Vec<String>,
    pub csv_path: PathBuf,
    pub table_path: PathBuf,
}

/// Re-judge every returned program on the full tests and report pass@k
/// per difficulty tier.
pub fn cmd_evaluate(cfg: &HarnessConfig, run_id: &str, out: &mut dyn Write) -> Result<EvaluateOutcome, CliError> {
    let problems = problems(cfg)?;
    let logs = TrajectoryStore::new(&cfg.paths.runs).load_run(run_id)?;
    let mut excluded = Vec::new();
    let mut judged_logs = Vec::new();
    for log in &logs {
        match problems.get(&log.problem_id) {
            Some(meta) if !meta.tests.is_empty() => judged_logs.push((log, meta)),
            _ => {
                if !excluded.contains(&log.problem_id) {
                    excluded.push(log.problem_id.clone());
                }
            }
        }
    }
    let sandbox = sandbox(cfg);
    let verdicts = par_map(&judged_logs, cfg.parallelism, |(log, meta)| {
        meta.limits()
            .and_then(|limits| sandbox.run_suite(log.returned_program(), &meta.tests, &limits))
            .map(|v| v.status)
    });

    let mut counts: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for ((log, _), status) in judged_logs.iter().zip(verdicts) {
        let entry = counts.entry(&log.problem_id).or_default();
        entry.0 += 1;
        entry.1 += u64::from(status? == Status::Accepted);
    }
    if counts.is_empty() {
        return Err(CliError::Store(format!("run `{run_id}` has no problem with tests")));
    }
    let samples: Vec<SampleBatch> = counts
        .iter()
        .map(|(id, &(n, c))| SampleBatch {
            problem_id: id.to_string(),
            n,
            c,
        })
        .collect();
    let rates: Vec<(String, f64)> = counts
        .keys()
        .map(|id| (id.to_string(), problems[*id].historical_pass_rate))
        .collect();
    let min_n = samples.iter().map(|s| s.n).min().unwrap_or(0);
    let ks: Vec<u64> = REPORTED_KS.into_iter().filter(|&k| k <= min_n).collect();
    if ks.is_empty() {
        return Err(CliError::Config("every problem needs at least one sample".into()));
    }
    let report = PassAtKReport::build(&samples, &stratify(&rates)?, &ks)?;

    let dir = cfg.paths.reports.join(run_id);
    fs::create_dir_all(&dir)?;
    let csv_path = dir.join("pass_at_k.csv");
    let table_path = dir.join("pass_at_k.txt");
    fs::write(&csv_path, report.to_csv())?;
    let table = report.to_table();
    fs::write(&table_path, &table)?;
    write!(out, "{table}")?;
    if !excluded.is_empty() {
        writeln!(out, "excluded {} problem(s) without tests: {}", excluded.len(), excluded.join(", "))?;
    }
    Ok(EvaluateOutcome {
        report,
        excluded,
        csv_path,
        table_path,
    })
}

// ---------------------------------------------------------------- curate

#[derive(Debug, Clone)]
pub struct CurateArgs {
    /// Metadata CSV of raw submissions.
    pub metadata: PathBuf,
    /// Root for the CSV's source paths; the CSV's folder by default.
    pub sources: Option<PathBuf>,
    pub out_dir: PathBuf,
}

pub fn cmd_curate(cfg: &HarnessConfig, args: &CurateArgs, out: &mut dyn Write) -> Result<CurationOutput, CliError> {
    let sources = args
        .sources
        .clone()
        .unwrap_or_else(|| args.metadata.parent().unwrap_or(Path::new(".")).to_path_buf());
    let submissions = load_submissions(&args.metadata, &sources)?;
    let problems = problems(cfg)?;
    let rules = match &cfg.curate.rules {
        Some(path) => RuleSet::load(path)?,
        None => RuleSet::builtin(),
    };
    let sandbox = sandbox(cfg);
    let output = curate(submissions, &problems, &rules, &sandbox, &cfg.curate.curation(cfg.parallelism));
    if !output.report.is_conserved() {
        return Err(CliError::Config(format!("filter counts do not add up: {:?}", output.report)));
    }

    let ids: Vec<&str> = output.records.iter().map(|r| r.problem_id.as_str()).collect();
    let split = split_problems(ids, cfg.curate.train_parts, cfg.curate.test_parts, cfg.seed)?;
    let summary = export_records(&output.records, &split, &args.out_dir)?;
    let mut all = String::new();
    for r in &output.records {
        all.push_str(&serde_json::to_string(r)?);
        all.push('\n');
    }
    fs::write(args.out_dir.join("records.jsonl"), all)?;
    fs::write(args.out_dir.join("filter_report.csv"), output.report.to_csv())?;
    let mut hits = String::from("submission_id,rule\n");
    for h in &output.rule_hits {
        let _ = writeln!(hits, "{},{}", h.submission_id, h.rule_id);
    }
    fs::write(args.out_dir.join("rule_hits.csv"), hits)?;

    write!(out, "{}", output.report.to_table())?;
    writeln!(
        out,
        "exported {} train / {} test records ({} / {} problems) to {}",
        summary.train_records,
        summary.test_records,
        split.train.len(),
        split.test.len(),
        args.out_dir.display()
    )?;
    Ok(output)
}

// ---------------------------------------------------------------- rl-toy

#[derive(Debug, Clone, Default)]
pub struct RlArgs {
    /// `<reports>/rl_toy` by default.
    pub out_dir: Option<PathBuf>,
    pub beta: Option<f64>,
    pub episodes: Option<usize>,
    pub eval_episodes: usize,
}

#[derive(Debug, Clone)]
pub struct RlSummary {
    pub untrained: EvalStats,
    pub trained: EvalStats,
    pub curve_path: PathBuf,
    pub checkpoint_path: PathBuf,
}

/// Train the toy policy on the one-corruption environment, write the
/// learning curve and checkpoint, and compare with the untrained policy.
pub fn cmd_rl_toy(cfg: &HarnessConfig, args: &RlArgs, out: &mut dyn Write) -> Result<RlSummary, CliError> {
    let mut rl = cfg.rl_toy.clone();
    if let Some(beta) = args.beta {
        rl.beta = beta;
    }
    if let Some(episodes) = args.episodes {
        rl.episodes = episodes;
    }
    rl.validate()?;
    let env = RepairEnv::one_corruption();
    let (policy, curve) = train_policy(&env, &rl)?;

    let dir = args.out_dir.clone().unwrap_or_else(|| cfg.paths.reports.join("rl_toy"));
    fs::create_dir_all(&dir)?;
    let curve_path = dir.join("curve.csv");
    let checkpoint_path = dir.join("policy.txt");
    let mut w = BufWriter::new(File::create(&curve_path)?);
    write_curve_csv(&curve, &mut w)?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(&checkpoint_path)?);
    policy.write_to(&mut w)?;
    w.flush()?;

    let eval_episodes = args.eval_episodes.max(1);
    let eval_seed = rl.seed.wrapping_add(1);
    let baseline = SoftmaxPolicy::uniform(env.num_states(), env.num_actions());
    let untrained = evaluate_policy(&env, &baseline, rl.beta, rl.max_steps, eval_episodes, eval_seed);
    let trained = evaluate_policy(&env, &policy, rl.beta, rl.max_steps, eval_episodes, eval_seed);
    writeln!(out, "beta {} lr {} episodes {}", rl.beta, rl.learning_rate, rl.episodes)?;
    writeln!(out, "{:<10} {:>12} {:>12} {:>10} {:>8}", "policy", "final_reward", "return", "kl", "solved")?;
    for (name, s) in [("untrained", &untrained), ("trained", &trained)] {
        writeln!(
            out,
            "{name:<10} {:>12.4} {:>12.4} {:>10.4} {:>8.3}",
            s.mean_final_reward, s.mean_return, s.mean_kl, s.solved_fraction
        )?;
    }
    Ok(RlSummary {
        untrained,
        trained,
        curve_path,
        checkpoint_path,
    })
}
