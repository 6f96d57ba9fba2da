use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use super::{ProblemMeta, RecordVersion, RepairRecord, SubmissionChain};
use crate::sandbox::{SandboxError, SuiteRunner};
use crate::status::Status;

/// Assumed mean judging time per program, in seconds.
pub const DEFAULT_SECONDS_PER_PROGRAM: f64 = 4.0;

/// Core-hours to re-judge `programs` programs at `seconds_each`.
pub fn cpu_hours_estimate(programs: u64, seconds_each: f64) -> f64 {
    programs as f64 * seconds_each / 3600.0
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerifyStats {
    pub versions_judged: usize,
    /// Versions whose verified status differs from the claimed one.
    pub status_changed: usize,
    /// Chains excluded because the sandbox failed or the problem is unknown.
    pub unverified: usize,
}

/// A chain whose versions all carry a verified status.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifiedChain {
    pub record: RepairRecord,
    /// Some version claimed AC before verification.
    pub claimed_accept: bool,
}

/// Re-judge every version with the problem's tests. Claimed statuses are
/// advisory: the verified status replaces them. A chain with any
/// infrastructure failure, or whose problem has no tests, is excluded.
pub fn reexecute_for_consistency(
    chains: Vec<SubmissionChain>,
    problems: &BTreeMap<String, ProblemMeta>,
    runner: &dyn SuiteRunner,
    parallelism: usize,
) -> (Vec<VerifiedChain>, VerifyStats) {
    // Flatten to (chain, version) jobs so workers stay busy across chains.
    let jobs: Vec<(usize, usize)> = chains
        .iter()
        .enumerate()
        .flat_map(|(c, chain)| (0..chain.submissions.len()).map(move |v| (c, v)))
        .collect();
    let results: Vec<Mutex<Option<Result<Status, SandboxError>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let work = || loop {
        let j = next.fetch_add(1, Ordering::Relaxed);
        let Some(&(c, v)) = jobs.get(j) else { break };
        let chain = &chains[c];
        let outcome = match problems.get(&chain.problem_id) {
            Some(p) if !p.tests.is_empty() => p
                .limits()
                .and_then(|limits| runner.run_suite(&chain.submissions[v].source, &p.tests, &limits))
                .map(|verdict| verdict.status),
            _ => Err(SandboxError::EmptySuite),
        };
        *results[j].lock().expect("result slot") = Some(outcome);
    };
    let workers = parallelism.max(1).min(jobs.len().max(1));
    if workers == 1 {
        work();
    } else {
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(work);
            }
        });
    }

    let mut results = results.into_iter().map(|m| m.into_inner().expect("result slot").expect("job ran"));
    let mut stats = VerifyStats::default();
    let mut out = Vec::with_capacity(chains.len());
    for chain in chains {
        let judged: Vec<_> = results.by_ref().take(chain.submissions.len()).collect();
        stats.versions_judged += judged.len();
        if judged.iter().any(Result::is_err) {
            stats.unverified += 1;
            continue;
        }
        let problem = &problems[&chain.problem_id];
        let claimed_accept = chain.submissions.iter().any(|s| s.claimed_status == Some(Status::Accepted));
        let versions = chain
            .submissions
            .into_iter()
            .zip(judged)
            .map(|(s, status)| {
                let status = status.expect("checked above");
                if s.claimed_status.is_some_and(|c| c != status) {
                    stats.status_changed += 1;
                }
                RecordVersion {
                    submission_id: s.submission_id,
                    source: s.source,
                    status,
                }
            })
            .collect();
        out.push(VerifiedChain {
            record: RepairRecord {
                user_id: chain.user_id,
                problem_id: chain.problem_id,
                time_limit_ms: problem.time_limit_ms,
                memory_bytes: problem.memory_bytes,
                versions,
            },
            claimed_accept,
        });
    }
    (out, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::RawSubmission;
    use crate::sandbox::{ResourceLimits, SuiteVerdict, TestCase, TestOutcome};

    /// Judges by looking for a status code in the source; `BOOM` fails.
    struct MarkerRunner;

    impl SuiteRunner for MarkerRunner {
        fn run_suite(&self, source: &str, tests: &[TestCase], _: &ResourceLimits) -> Result<SuiteVerdict, SandboxError> {
            if source.contains("BOOM") {
                return Err(SandboxError::Infrastructure("sandbox down".into()));
            }
            let status = Status::ALL.into_iter().find(|s| source.contains(s.code())).unwrap_or(Status::RuntimeError);
            SuiteVerdict::from_outcomes(
                tests
                    .iter()
                    .map(|t| TestOutcome {
                        test_id: t.id.clone(),
                        status,
                        cpu_time_ms: 0,
                        peak_memory_bytes: 0,
                    })
                    .collect(),
            )
        }
    }

    fn problems() -> BTreeMap<String, ProblemMeta> {
        let p = ProblemMeta {
            problem_id: "p1".into(),
            description: "add".into(),
            time_limit_ms: 1000,
            memory_bytes: 1 << 28,
            tests: vec![TestCase::new("1", "1 2\n", "3\n")],
            historical_pass_rate: 0.5,
        };
        [("p1".to_string(), p)].into_iter().collect()
    }

    fn chain(problem: &str, sources: &[(&str, Option<Status>)]) -> SubmissionChain {
        SubmissionChain {
            user_id: "u".into(),
            problem_id: problem.into(),
            submissions: sources
                .iter()
                .enumerate()
                .map(|(i, (src, claimed))| RawSubmission {
                    submission_id: format!("{problem}-{i}"),
                    user_id: "u".into(),
                    problem_id: problem.into(),
                    timestamp: i as i64,
                    source: src.to_string(),
                    claimed_status: *claimed,
                })
                .collect(),
        }
    }

    #[test]
    fn verified_status_replaces_claimed() {
        let chains = vec![
            chain("p1", &[("WA", Some(Status::WrongAnswer)), ("WA again", Some(Status::Accepted))]),
            chain("p1", &[("BOOM", None)]),
            chain("nope", &[("AC", None)]),
        ];
        for parallelism in [1, 4] {
            let (out, stats) = reexecute_for_consistency(chains.clone(), &problems(), &MarkerRunner, parallelism);
            assert_eq!(out.len(), 1);
            assert!(out[0].claimed_accept);
            assert_eq!(out[0].record.versions[1].status, Status::WrongAnswer);
            assert_eq!(
                stats,
                VerifyStats {
                    versions_judged: 4,
                    status_changed: 1,
                    unverified: 2
                }
            );
        }
    }

    #[test]
    fn verification_is_idempotent() {
        let c = chain("p1", &[("CE", None), ("PE", None), ("AC", None)]);
        let (a, _) = reexecute_for_consistency(vec![c], &problems(), &MarkerRunner, 2);
        let again = SubmissionChain {
            user_id: "u".into(),
            problem_id: "p1".into(),
            submissions: a[0]
                .record
                .versions
                .iter()
                .enumerate()
                .map(|(i, v)| RawSubmission {
                    submission_id: v.submission_id.clone(),
                    user_id: "u".into(),
                    problem_id: "p1".into(),
                    timestamp: i as i64,
                    source: v.source.clone(),
                    claimed_status: Some(v.status),
                })
                .collect(),
        };
        let (b, stats) = reexecute_for_consistency(vec![again], &problems(), &MarkerRunner, 2);
        assert_eq!(a[0].record, b[0].record);
        assert_eq!(stats.status_changed, 0);
    }

    #[test]
    fn core_hour_arithmetic() {
        let hours = cpu_hours_estimate(1_227_259, DEFAULT_SECONDS_PER_PROGRAM);
        assert!((hours - 1363.62).abs() < 0.01);
        assert_eq!(hours.round(), 1364.0);
    }
}
