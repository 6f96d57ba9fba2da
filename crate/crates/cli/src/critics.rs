use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::sync::Mutex;

use stepfix::dataset::ProblemMeta;
use stepfix::repair_loop::{Critic, CriticError, ProblemContext};
use stepfix::reward::{oracle_critic, RankerParams};
use stepfix::sandbox::{SuiteRunner, SuiteVerdict};
use stepfix::Status;

use crate::CliError;

/// Judges programs against the problem's full test suite. Verdicts are
/// cached per (problem, program) since the loop rescores unchanged programs.
pub struct OracleCritic<'a> {
    runner: &'a dyn SuiteRunner,
    problems: &'a BTreeMap<String, ProblemMeta>,
    cache: Mutex<HashMap<(String, String), SuiteVerdict>>,
}

impl<'a> OracleCritic<'a> {
    pub fn new(runner: &'a dyn SuiteRunner, problems: &'a BTreeMap<String, ProblemMeta>) -> Self {
        Self {
            runner,
            problems,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn verdict(&self, program: &str, problem_id: &str) -> Result<SuiteVerdict, CriticError> {
        let key = (problem_id.to_string(), program.to_string());
        if let Some(v) = self.cache.lock().expect("cache").get(&key) {
            return Ok(v.clone());
        }
        let meta = self
            .problems
            .get(problem_id)
            .ok_or_else(|| CriticError(format!("unknown problem `{problem_id}`")))?;
        if meta.tests.is_empty() {
            return Err(CriticError(format!("problem `{problem_id}` has no tests")));
        }
        let limits = meta.limits().map_err(|e| CriticError(e.to_string()))?;
        let verdict = self
            .runner
            .run_suite(program, &meta.tests, &limits)
            .map_err(|e| CriticError(e.to_string()))?;
        self.cache.lock().expect("cache").insert(key, verdict.clone());
        Ok(verdict)
    }
}

impl Critic for OracleCritic<'_> {
    fn review(&self, program: &str, problem: &ProblemContext) -> Result<f64, CriticError> {
        let v = self.verdict(program, &problem.problem_id)?;
        oracle_critic(v.status, v.passed_fraction())
            .map(|s| s.value())
            .map_err(|e| CriticError(e.to_string()))
    }

    /// Status, then the first failing test's input and expected output.
    fn feedback(&self, program: &str, problem: &ProblemContext) -> Option<String> {
        let v = self.verdict(program, &problem.problem_id).ok()?;
        let mut text = format!("Status: {}", v.status);
        if let Some(diag) = &v.compile_diagnostic {
            text.push('\n');
            text.push_str(diag.trim_end());
        }
        let failing = v.outcomes.iter().find(|o| o.status != Status::Accepted)?;
        let test = self.problems.get(&problem.problem_id)?.tests.iter().find(|t| t.id == failing.test_id)?;
        text.push_str(&format!(
            "\nFailing test {} ({}):\nInput:\n{}\nExpected output:\n{}",
            failing.test_id,
            failing.status,
            String::from_utf8_lossy(&test.input).trim_end(),
            String::from_utf8_lossy(&test.expected_output).trim_end(),
        ));
        Some(text)
    }
}

/// Scores with a trained ranker; no execution.
pub struct RankerCritic {
    pub params: RankerParams,
}

impl RankerCritic {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let file = File::open(path).map_err(|e| CliError::Config(format!("cannot open ranker {}: {e}", path.display())))?;
        Ok(Self {
            params: RankerParams::read_from(BufReader::new(file))?,
        })
    }
}

impl Critic for RankerCritic {
    fn review(&self, program: &str, problem: &ProblemContext) -> Result<f64, CriticError> {
        Ok(self.params.score_in_context(Some(&problem.description), program).value())
    }
}
