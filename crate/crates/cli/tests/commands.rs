use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use stepfix::dataset::{RecordVersion, RepairRecord};
use stepfix::repair_loop::{ExitReason, LoopConfig, Trajectory};
use stepfix::reward::{LossKind, RewardError};
use stepfix::Status;
use stepfix_cli::commands::{cmd_evaluate, cmd_judge, cmd_repair, cmd_train_rm, RepairArgs, TrainRmArgs};
use stepfix_cli::config::{ActorBackend, CriticBackend};
use stepfix_cli::critics::RankerCritic;
use stepfix_cli::store::{TrajectoryLog, TrajectoryStore};
use stepfix_cli::{CliError, HarnessConfig};
use tempfile::TempDir;

const ADD_AC: &str = "a, b = map(int, input().split())\nprint(a + b)\n";
const ADD_WA: &str = "a, b = map(int, input().split())\nprint(a - b)\n";

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn harness(scratch: &TempDir) -> HarnessConfig {
    let mut cfg = HarnessConfig::load(&fixtures().join("harness.toml")).unwrap();
    cfg.paths.runs = scratch.path().join("runs");
    cfg.paths.reports = scratch.path().join("reports");
    cfg
}

fn sink() -> std::io::Sink {
    std::io::sink()
}

#[test]
fn judge_reports_golden_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = harness(&dir);
    for (file, want) in [
        ("ac_plain.py", Status::Accepted),
        ("wa_off_by_one.py", Status::WrongAnswer),
        ("tle_sleep.py", Status::TimeLimitExceeded),
    ] {
        let v = cmd_judge(&cfg, &fixtures().join("golden").join(file), "add", &mut sink()).unwrap();
        assert_eq!(v.status, want, "{file}");
    }
    let err = cmd_judge(&cfg, &fixtures().join("golden/ac_plain.py"), "nope", &mut sink()).unwrap_err();
    assert!(matches!(err, CliError::UnknownProblem(_)));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_stepfix");
    let config = fixtures().join("harness.toml");
    let run = |file: &str, problem: &str| {
        Command::new(bin)
            .arg("--config")
            .arg(&config)
            .args(["judge", "--problem", problem])
            .arg(fixtures().join("golden").join(file))
            .output()
            .unwrap()
    };
    let ok = run("ac_plain.py", "add");
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("status: AC"));
    assert_eq!(run("wa_off_by_one.py", "add").status.code(), Some(1));
    assert_eq!(run("ac_plain.py", "missing").status.code(), Some(2));
}

#[test]
fn train_rm_supports_every_loss_and_writes_loadable_params() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = harness(&dir);
    cfg.train_rm.steps = 4;
    cfg.train_rm.batch_size = 8;
    for loss in [LossKind::Pair, LossKind::Point, LossKind::List] {
        let args = TrainRmArgs {
            loss: Some(loss),
            out: Some(dir.path().join(format!("{loss:?}.txt"))),
            ..TrainRmArgs::default()
        };
        let s = cmd_train_rm(&cfg, &args, &mut sink()).unwrap();
        assert_eq!(s.log.len(), 4);
        assert!(s.log.iter().all(|e| e.comparisons == 8 * 36 && e.loss.is_finite()));
        let critic = RankerCritic::load(&s.params_path).unwrap();
        assert!(critic.params.is_finite());
        let csv = fs::read_to_string(&s.log_path).unwrap();
        assert_eq!(csv.lines().count(), 5);
    }
}

#[test]
fn train_rm_rejects_a_corpus_without_contrast() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = harness(&dir);
    let record = RepairRecord {
        user_id: "u".into(),
        problem_id: "add".into(),
        time_limit_ms: 1000,
        memory_bytes: 1 << 28,
        versions: vec![RecordVersion {
            submission_id: "s".into(),
            source: ADD_AC.into(),
            status: Status::Accepted,
        }],
    };
    let corpus = dir.path().join("flat.jsonl");
    fs::write(&corpus, serde_json::to_string(&record).unwrap() + "\n").unwrap();
    let args = TrainRmArgs {
        corpus: Some(corpus),
        ..TrainRmArgs::default()
    };
    let err = cmd_train_rm(&cfg, &args, &mut sink()).unwrap_err();
    assert!(matches!(err, CliError::Reward(RewardError::Training(_))), "{err}");
}

/// A run where `add` returned `programs[i]` for sample `i` without looping.
fn seed_run(cfg: &HarnessConfig, run_id: &str, programs: &[&str]) {
    let store = TrajectoryStore::new(&cfg.paths.runs);
    for (i, p) in programs.iter().enumerate() {
        store
            .append(&TrajectoryLog {
                run_id: run_id.into(),
                problem_id: "add".into(),
                sample_index: i,
                initial_program: p.to_string(),
                trajectory: None,
                error: Some("not started".into()),
            })
            .unwrap();
    }
}

#[test]
fn evaluate_counts_accepted_samples() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = harness(&dir);

    seed_run(&cfg, "all", &[ADD_AC; 5]);
    let all = cmd_evaluate(&cfg, "all", &mut sink()).unwrap();
    assert_eq!(all.report.ks, [1, 3, 5]);
    assert_eq!(all.report.tier("All").unwrap().pass_at, [Some(1.0); 3]);

    seed_run(&cfg, "one", &[ADD_WA, ADD_WA, ADD_AC, ADD_WA, ADD_WA]);
    let one = cmd_evaluate(&cfg, "one", &mut sink()).unwrap();
    let row = &one.report.tier("All").unwrap().pass_at;
    // 1 - C(4,k)/C(5,k)
    let want = [0.2, 0.6, 1.0];
    for (got, want) in row.iter().zip(want) {
        assert!((got.unwrap() - want).abs() < 1e-12, "{row:?}");
    }
    assert!(fs::read_to_string(&one.csv_path).unwrap().contains("All"));
}

#[test]
fn evaluate_limits_k_to_the_samples_taken() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = harness(&dir);
    seed_run(&cfg, "short", &[ADD_AC, ADD_WA, ADD_WA]);
    let out = cmd_evaluate(&cfg, "short", &mut sink()).unwrap();
    assert_eq!(out.report.ks, [1, 3]);
}

fn repair_summary(cfg: &HarnessConfig, run_id: &str) -> stepfix_cli::commands::RepairSummary {
    let args = RepairArgs {
        run_id: run_id.into(),
        corpus: None,
        records_per_problem: 1,
    };
    cmd_repair(cfg, &args, &mut sink()).unwrap()
}

#[test]
fn mock_repair_is_reproducible_and_fixes_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = harness(&dir);
    cfg.actor = ActorBackend::Mock {
        script: fixtures().join("mock_script.json"),
    };
    cfg.samples_per_problem = 2;
    let first = repair_summary(&cfg, "a");
    let second = repair_summary(&cfg, "b");
    assert_eq!(first.summary_csv, second.summary_csv);
    assert_eq!(first.trajectories, 10);

    let logs = TrajectoryStore::new(&cfg.paths.runs).load_run("a").unwrap();
    for log in &logs {
        let t: &Trajectory = log.trajectory.as_ref().unwrap();
        assert!(matches!(t.exit_reason, ExitReason::Patience | ExitReason::MaxIterations));
        assert_eq!(t.returned().reward, 4.0, "{} was not repaired", log.problem_id);
    }
    let eval = cmd_evaluate(&cfg, "a", &mut sink()).unwrap();
    assert_eq!(eval.report.tier("All").unwrap().pass_at[0], Some(1.0));
}

#[test]
fn mutation_repair_ignores_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = harness(&dir);
    assert!(matches!(cfg.actor, ActorBackend::Mutation(_)));
    assert_eq!(cfg.critic, CriticBackend::Oracle);
    cfg.samples_per_problem = 2;
    cfg.loop_cfg = LoopConfig {
        max_iterations: 3,
        ..cfg.loop_cfg
    };
    cfg.parallelism = 1;
    let serial = repair_summary(&cfg, "serial");
    cfg.parallelism = 4;
    let parallel = repair_summary(&cfg, "parallel");
    assert_eq!(serial.summary_csv, parallel.summary_csv);
}

#[test]
fn a_run_id_cannot_be_reused() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = harness(&dir);
    cfg.actor = ActorBackend::Mock {
        script: fixtures().join("mock_script.json"),
    };
    cfg.samples_per_problem = 1;
    repair_summary(&cfg, "once");
    let args = RepairArgs {
        run_id: "once".into(),
        corpus: None,
        records_per_problem: 1,
    };
    assert!(matches!(cmd_repair(&cfg, &args, &mut sink()), Err(CliError::Store(_))));
}
