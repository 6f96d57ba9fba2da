use std::collections::BTreeMap;

use super::{RawSubmission, RecordVersion, RepairRecord, SubmissionChain};
use crate::status::Status;

/// Group by (user, problem) and order each group by timestamp, then id.
/// Chains come out sorted by (problem, user).
pub fn build_chains(submissions: Vec<RawSubmission>) -> Vec<SubmissionChain> {
    let mut groups: BTreeMap<(String, String), Vec<RawSubmission>> = BTreeMap::new();
    for s in submissions {
        groups.entry((s.problem_id.clone(), s.user_id.clone())).or_default().push(s);
    }
    groups
        .into_iter()
        .map(|((problem_id, user_id), mut subs)| {
            subs.sort_by(|a, b| (a.timestamp, &a.submission_id).cmp(&(b.timestamp, &b.submission_id)));
            SubmissionChain {
                user_id,
                problem_id,
                submissions: subs,
            }
        })
        .collect()
}

/// Cut a judged chain after its first AC. `None` if nothing was accepted.
/// Returns the truncated versions and how many were cut.
pub fn truncate_at_first_accept(versions: Vec<RecordVersion>) -> Option<(Vec<RecordVersion>, usize)> {
    let first = versions.iter().position(|v| v.status == Status::Accepted)?;
    let cut = versions.len() - first - 1;
    let mut versions = versions;
    versions.truncate(first + 1);
    Some((versions, cut))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TerminalFilterStats {
    pub dropped_no_accept: usize,
    pub versions_truncated: usize,
}

/// Drop records with no accepted version and truncate the rest at their
/// first AC.
pub fn require_accepted_terminal(records: Vec<RepairRecord>) -> (Vec<RepairRecord>, TerminalFilterStats) {
    let mut stats = TerminalFilterStats::default();
    let mut out = Vec::with_capacity(records.len());
    for mut r in records {
        match truncate_at_first_accept(std::mem::take(&mut r.versions)) {
            Some((versions, cut)) => {
                stats.versions_truncated += cut;
                r.versions = versions;
                out.push(r);
            }
            None => stats.dropped_no_accept += 1,
        }
    }
    (out, stats)
}

/// Records with at least `min_versions` versions. Length-1 records hold no
/// repair step, so repair training uses `min_versions = 2`.
pub fn with_min_versions(records: Vec<RepairRecord>, min_versions: usize) -> (Vec<RepairRecord>, usize) {
    let before = records.len();
    let kept: Vec<_> = records.into_iter().filter(|r| r.versions.len() >= min_versions).collect();
    let dropped = before - kept.len();
    (kept, dropped)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(statuses: &[Status]) -> RepairRecord {
        RepairRecord {
            user_id: "u".into(),
            problem_id: "p".into(),
            time_limit_ms: 1000,
            memory_bytes: 1 << 28,
            versions: statuses
                .iter()
                .enumerate()
                .map(|(i, &status)| RecordVersion {
                    submission_id: format!("s{i}"),
                    source: format!("v{i}"),
                    status,
                })
                .collect(),
        }
    }

    #[test]
    fn chains_are_grouped_and_ordered() {
        let mk = |id: &str, user: &str, problem: &str, t: i64| RawSubmission {
            submission_id: id.into(),
            user_id: user.into(),
            problem_id: problem.into(),
            timestamp: t,
            source: String::new(),
            claimed_status: None,
        };
        let chains = build_chains(vec![
            mk("c", "u1", "p1", 30),
            mk("a", "u1", "p1", 10),
            mk("x", "u2", "p1", 5),
            mk("b", "u1", "p1", 10),
            mk("y", "u1", "p0", 1),
        ]);
        let shape: Vec<(String, Vec<String>)> = chains
            .iter()
            .map(|c| {
                (
                    format!("{}/{}", c.problem_id, c.user_id),
                    c.submissions.iter().map(|s| s.submission_id.clone()).collect(),
                )
            })
            .collect();
        assert_eq!(shape[0], ("p0/u1".to_string(), vec!["y".to_string()]));
        assert_eq!(shape[1], ("p1/u1".to_string(), vec!["a".into(), "b".into(), "c".into()]));
        assert_eq!(shape[2].0, "p1/u2");
    }

    #[test]
    fn terminal_rule() {
        use Status::{Accepted as Ac, RuntimeError as Re, TimeLimitExceeded as Tle, WrongAnswer as Wa};
        let (out, stats) = require_accepted_terminal(vec![
            record(&[Wa, Wa, Ac]),
            record(&[Wa, Tle]),
            record(&[Ac]),
            record(&[Re, Ac, Wa, Ac]),
        ]);
        assert_eq!(out.len(), 3);
        assert_eq!(out[0].versions.len(), 3);
        assert_eq!(out[1].versions.len(), 1);
        assert_eq!(out[2].versions.len(), 2);
        assert!(out.iter().all(RepairRecord::is_valid));
        assert_eq!(
            stats,
            TerminalFilterStats {
                dropped_no_accept: 1,
                versions_truncated: 2
            }
        );
        let (repair, short) = with_min_versions(out, 2);
        assert_eq!((repair.len(), short), (2, 1));
    }
}
