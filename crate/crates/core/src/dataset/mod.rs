//! Curation of raw judge submissions into repair records: filtering,
//! privacy scrubbing, chaining, re-execution and split export.

mod chain;
mod export;
mod filters;
mod ingest;
mod privacy;
mod records;
mod verify;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chain::{build_chains, require_accepted_terminal, truncate_at_first_accept, with_min_versions, TerminalFilterStats};
pub use export::{
    export_records, read_manifest, read_records, split_problems, test_count, ExportSummary, ProblemSplit,
};
pub use filters::{dedup_filter, malicious_filter, normalized_hash, MaliciousRule, RuleHit, RuleSet};
pub use ingest::{load_problem, load_problems, load_submissions, StripTags, TextExtractor};
pub use privacy::{privacy_scrub, python_comment_spans, reveals_identity, ScrubOutcome};
pub use records::{ProblemMeta, RawSubmission, RecordVersion, RepairRecord, SubmissionChain};
pub use verify::{
    cpu_hours_estimate, reexecute_for_consistency, VerifiedChain, VerifyStats, DEFAULT_SECONDS_PER_PROGRAM,
};

use crate::sandbox::SuiteRunner;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed input: {0}")]
    Format(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("problems present in both splits: {}", .0.join(", "))]
    Leakage(Vec<String>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Per-stage counts. Submissions: `input = duplicates_removed +
/// malicious_removed + submissions_chained`. Chains: `chains_built =
/// unverified + chains_dropped_no_accept + inconsistent_removed +
/// short_records_excluded + records_out`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input: usize,
    pub duplicates_removed: usize,
    pub malicious_removed: usize,
    /// Submissions whose comments were changed; they are kept.
    pub privacy_scrubbed: usize,
    pub submissions_chained: usize,
    pub chains_built: usize,
    pub unverified: usize,
    /// Chains with no AC either claimed or verified.
    pub chains_dropped_no_accept: usize,
    /// Chains that claimed an AC which re-execution did not confirm.
    pub inconsistent_removed: usize,
    pub short_records_excluded: usize,
    pub records_out: usize,
    pub versions_judged: usize,
    pub status_changed: usize,
    pub versions_truncated_after_accept: usize,
    pub versions_out: usize,
}

impl FilterReport {
    pub fn is_conserved(&self) -> bool {
        self.input == self.duplicates_removed + self.malicious_removed + self.submissions_chained
            && self.chains_built
                == self.unverified
                    + self.chains_dropped_no_accept
                    + self.inconsistent_removed
                    + self.short_records_excluded
                    + self.records_out
            && self.versions_judged >= self.versions_out + self.versions_truncated_after_accept
    }

    fn rows(&self) -> [(&'static str, usize); 15] {
        [
            ("input", self.input),
            ("duplicates_removed", self.duplicates_removed),
            ("malicious_removed", self.malicious_removed),
            ("privacy_scrubbed", self.privacy_scrubbed),
            ("submissions_chained", self.submissions_chained),
            ("chains_built", self.chains_built),
            ("unverified", self.unverified),
            ("chains_dropped_no_accept", self.chains_dropped_no_accept),
            ("inconsistent_removed", self.inconsistent_removed),
            ("short_records_excluded", self.short_records_excluded),
            ("records_out", self.records_out),
            ("versions_judged", self.versions_judged),
            ("status_changed", self.status_changed),
            ("versions_truncated_after_accept", self.versions_truncated_after_accept),
            ("versions_out", self.versions_out),
        ]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,count\n");
        for (k, v) in self.rows() {
            let _ = writeln!(out, "{k},{v}");
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.rows() {
            let _ = writeln!(out, "{k:<32} {v:>10}");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurationConfig {
    /// Records shorter than this are excluded (2 keeps only real repairs).
    pub min_versions: usize,
    pub parallelism: usize,
}

impl Default for CurationConfig {
    fn default() -> Self {
        Self {
            min_versions: 1,
            parallelism: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CurationOutput {
    pub records: Vec<RepairRecord>,
    pub report: FilterReport,
    pub rule_hits: Vec<RuleHit>,
}

/// Dedup, malicious filter, privacy scrub, chain, re-execute, AC-terminal
/// rule, length filter, in that order.
pub fn curate(
    submissions: Vec<RawSubmission>,
    problems: &BTreeMap<String, ProblemMeta>,
    rules: &RuleSet,
    runner: &dyn SuiteRunner,
    cfg: &CurationConfig,
) -> CurationOutput {
    let mut report = FilterReport {
        input: submissions.len(),
        ..FilterReport::default()
    };
    let (subs, dups) = dedup_filter(submissions);
    report.duplicates_removed = dups;
    let (subs, rule_hits) = malicious_filter(subs, rules);
    report.malicious_removed = rule_hits.len();
    let subs: Vec<RawSubmission> = subs
        .into_iter()
        .map(|mut s| {
            let scrub = privacy_scrub(&s.source);
            if scrub.changed() {
                report.privacy_scrubbed += 1;
                s.source = scrub.source;
            }
            s
        })
        .collect();
    report.submissions_chained = subs.len();

    let chains = build_chains(subs);
    report.chains_built = chains.len();
    let (verified, vstats) = reexecute_for_consistency(chains, problems, runner, cfg.parallelism);
    report.unverified = vstats.unverified;
    report.versions_judged = vstats.versions_judged;
    report.status_changed = vstats.status_changed;

    let mut records = Vec::with_capacity(verified.len());
    for v in verified {
        match truncate_at_first_accept(v.record.versions) {
            Some((versions, cut)) => {
                report.versions_truncated_after_accept += cut;
                records.push(RepairRecord { versions, ..v.record });
            }
            None if v.claimed_accept => report.inconsistent_removed += 1,
            None => report.chains_dropped_no_accept += 1,
        }
    }
    let (records, short) = with_min_versions(records, cfg.min_versions);
    report.short_records_excluded = short;
    report.records_out = records.len();
    report.versions_out = records.iter().map(|r| r.versions.len()).sum();
    CurationOutput {
        records,
        report,
        rule_hits,
    }
}
