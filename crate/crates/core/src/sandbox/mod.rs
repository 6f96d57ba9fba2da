//! Running candidate programs against test cases and turning the result
//! into a [`Status`].
//!
//! The pure parts (output comparison, suite aggregation, the outcome log
//! format) live here and are available on every target. Process execution
//! under resource limits is in [`process`] and needs a Unix host.

mod profile;
#[cfg(unix)]
mod process;

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

pub use profile::{LanguageProfile, ProfileRegistry};
#[cfg(unix)]
pub use process::Sandbox;

use crate::status::Status;

#[derive(Debug, thiserror::Error)]
pub enum SandboxError {
    #[error("unknown language profile `{0}`")]
    UnknownProfile(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid resource limits: {0}")]
    InvalidLimits(String),
    #[error("test suite is empty")]
    EmptySuite,
    #[error("sandbox infrastructure failure: {0}")]
    Infrastructure(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: String,
    pub input: Vec<u8>,
    pub expected_output: Vec<u8>,
}

impl TestCase {
    pub fn new(id: impl Into<String>, input: impl Into<Vec<u8>>, expected: impl Into<Vec<u8>>) -> Self {
        Self {
            id: id.into(),
            input: input.into(),
            expected_output: expected.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceLimits {
    pub cpu_time_ms: u64,
    pub wall_time_ms: u64,
    pub memory_bytes: u64,
    pub output_bytes: u64,
}

pub const DEFAULT_OUTPUT_BYTES: u64 = 8 << 20;

impl ResourceLimits {
    pub fn new(
        cpu_time_ms: u64,
        wall_time_ms: u64,
        memory_bytes: u64,
        output_bytes: u64,
    ) -> Result<Self, SandboxError> {
        let limits = Self {
            cpu_time_ms,
            wall_time_ms,
            memory_bytes,
            output_bytes,
        };
        limits.validate()?;
        Ok(limits)
    }

    /// Limits for a problem's published time and memory bounds. CPU time is
    /// the limit of record; the wall clock gets twice as much so a sleeping
    /// program is still stopped.
    pub fn for_problem(time_limit_ms: u64, memory_bytes: u64) -> Result<Self, SandboxError> {
        Self::new(
            time_limit_ms,
            time_limit_ms.saturating_mul(2),
            memory_bytes,
            DEFAULT_OUTPUT_BYTES,
        )
    }

    pub fn validate(&self) -> Result<(), SandboxError> {
        if self.cpu_time_ms == 0 || self.wall_time_ms == 0 || self.memory_bytes == 0 || self.output_bytes == 0 {
            return Err(SandboxError::InvalidLimits("all limits must be positive".into()));
        }
        if self.wall_time_ms < self.cpu_time_ms {
            return Err(SandboxError::InvalidLimits(format!(
                "wall time {}ms is below cpu time {}ms",
                self.wall_time_ms, self.cpu_time_ms
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExitKind {
    Normal { code: i32 },
    KilledTime,
    KilledMemory,
    Crashed { description: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunResult {
    pub stdout: Vec<u8>,
    pub stderr: Vec<u8>,
    pub exit_kind: ExitKind,
    pub cpu_time_ms: u64,
    pub peak_memory_bytes: u64,
}

impl RunResult {
    /// Verdict for a single test given its expected output.
    pub fn classify(&self, expected: &[u8]) -> Status {
        match &self.exit_kind {
            ExitKind::Normal { code: 0 } => judge_output(&self.stdout, expected),
            ExitKind::Normal { .. } | ExitKind::Crashed { .. } => Status::RuntimeError,
            ExitKind::KilledTime => Status::TimeLimitExceeded,
            ExitKind::KilledMemory => Status::MemoryLimitExceeded,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CompileOutcome {
    Ok,
    CompileError(String),
}

/// Compare program output with the expected output.
///
/// AC for byte-identical output, PE when the two agree after dropping
/// trailing whitespace on every line, trailing blank lines and CR before
/// LF, WA otherwise.
pub fn judge_output(actual: &[u8], expected: &[u8]) -> Status {
    if actual == expected {
        Status::Accepted
    } else if normalize_output(actual) == normalize_output(expected) {
        Status::PresentationError
    } else {
        Status::WrongAnswer
    }
}

fn normalize_output(bytes: &[u8]) -> Vec<&[u8]> {
    let mut lines: Vec<&[u8]> = bytes
        .split(|&b| b == b'\n')
        .map(|line| {
            let end = line
                .iter()
                .rposition(|b| !b.is_ascii_whitespace())
                .map_or(0, |i| i + 1);
            &line[..end]
        })
        .collect();
    while lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    lines
}

/// One line of the per-test outcome log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub test_id: String,
    pub status: Status,
    pub cpu_time_ms: u64,
    pub peak_memory_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteVerdict {
    pub status: Status,
    pub compile_diagnostic: Option<String>,
    pub outcomes: Vec<TestOutcome>,
}

impl SuiteVerdict {
    pub fn compile_error(diagnostic: String) -> Self {
        Self {
            status: Status::CompileError,
            compile_diagnostic: Some(diagnostic),
            outcomes: Vec::new(),
        }
    }

    pub fn from_outcomes(outcomes: Vec<TestOutcome>) -> Result<Self, SandboxError> {
        let status = aggregate_statuses(outcomes.iter().map(|o| o.status)).ok_or(SandboxError::EmptySuite)?;
        Ok(Self {
            status,
            compile_diagnostic: None,
            outcomes,
        })
    }

    /// Fraction of executed tests that were accepted. Zero when nothing ran.
    pub fn passed_fraction(&self) -> f64 {
        if self.outcomes.is_empty() {
            return 0.0;
        }
        let passed = self.outcomes.iter().filter(|o| o.status.is_accepted()).count();
        passed as f64 / self.outcomes.len() as f64
    }

    pub fn write_outcome_log<W: Write>(&self, mut out: W) -> io::Result<()> {
        for outcome in &self.outcomes {
            serde_json::to_writer(&mut out, outcome)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

pub fn read_outcome_log<R: BufRead>(input: R) -> io::Result<Vec<TestOutcome>> {
    let mut outcomes = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        outcomes.push(serde_json::from_str(&line)?);
    }
    Ok(outcomes)
}

/// Worst verdict wins. Within the shared WA/TLE/MLE level the precedence is
/// TLE > MLE > WA. Returns `None` for an empty iterator.
pub fn aggregate_statuses(statuses: impl IntoIterator<Item = Status>) -> Option<Status> {
    statuses
        .into_iter()
        .min_by(|a, b| a.rank().cmp(&b.rank()).then(b.severity().cmp(&a.severity())))
}

/// Anything that can judge a program against a test suite.
pub trait SuiteRunner: Sync {
    fn run_suite(&self, source: &str, tests: &[TestCase], limits: &ResourceLimits) -> Result<SuiteVerdict, SandboxError>;
}
