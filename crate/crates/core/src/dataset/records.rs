use serde::{Deserialize, Serialize};

use crate::sandbox::{ResourceLimits, SandboxError, TestCase};
use crate::status::Status;

/// One submission as it comes out of the judge archive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawSubmission {
    pub submission_id: String,
    pub user_id: String,
    pub problem_id: String,
    /// Seconds since the epoch.
    pub timestamp: i64,
    pub source: String,
    pub claimed_status: Option<Status>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemMeta {
    pub problem_id: String,
    pub description: String,
    pub time_limit_ms: u64,
    pub memory_bytes: u64,
    pub tests: Vec<TestCase>,
    pub historical_pass_rate: f64,
}

impl ProblemMeta {
    pub fn limits(&self) -> Result<ResourceLimits, SandboxError> {
        ResourceLimits::for_problem(self.time_limit_ms, self.memory_bytes)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordVersion {
    pub submission_id: String,
    pub source: String,
    pub status: Status,
}

/// A user's chronologically ordered attempts at one problem, ending in AC.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairRecord {
    pub user_id: String,
    pub problem_id: String,
    pub time_limit_ms: u64,
    pub memory_bytes: u64,
    pub versions: Vec<RecordVersion>,
}

impl RepairRecord {
    pub fn terminal(&self) -> Option<&RecordVersion> {
        self.versions.last()
    }

    /// Non-empty and the last version, only the last, is accepted.
    pub fn is_valid(&self) -> bool {
        match self.versions.split_last() {
            Some((last, rest)) => last.status == Status::Accepted && rest.iter().all(|v| v.status != Status::Accepted),
            None => false,
        }
    }
}

/// Submissions of one user to one problem in time order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubmissionChain {
    pub user_id: String,
    pub problem_id: String,
    pub submissions: Vec<RawSubmission>,
}
