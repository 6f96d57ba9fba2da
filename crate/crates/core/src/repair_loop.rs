//! Iterative actor-critic repair.
//!
//! The actor proposes a new version of the program, the critic scores it,
//! and the loop keeps going until `max_iterations` proposals have been made
//! or `max_patience` consecutive proposals failed to raise the score. In the
//! default [`ReturnMode::Faithful`] mode it then rolls back `p` steps and
//! returns `x[t - p]`, the last version that improved on its predecessor.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::sandbox::TestCase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnMode {
    /// Return `x[t - p]`.
    #[default]
    Faithful,
    /// Return the highest-reward version, earliest on ties.
    BestOfTrajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    pub max_iterations: usize,
    pub max_patience: usize,
    pub return_mode: ReturnMode,
    /// Pass the critic's feedback text about the current version to the actor.
    pub explicit_feedback: bool,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            max_iterations: 5,
            max_patience: 2,
            return_mode: ReturnMode::Faithful,
            explicit_feedback: false,
        }
    }
}

/// What the actor and critic know about the problem being repaired.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemContext {
    pub problem_id: String,
    pub description: String,
    pub time_limit_ms: u64,
    pub memory_bytes: u64,
    /// Public sample tests shown to the actor; hidden tests stay with the critic.
    #[serde(default)]
    pub sample_tests: Vec<TestCase>,
}

#[derive(Debug, Clone, Copy)]
pub struct ActorContext<'a> {
    pub problem: &'a ProblemContext,
    pub sample_index: usize,
    /// Index of the version being refined.
    pub step: usize,
    pub feedback: Option<&'a str>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("actor failed: {0}")]
pub struct ActorError(pub String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("critic failed: {0}")]
pub struct CriticError(pub String);

/// Produces the next version of a program.
pub trait Actor: Sync {
    fn next(&self, program: &str, ctx: &ActorContext<'_>) -> Result<String, ActorError>;
}

/// Scores a program. Must be deterministic for a given program and problem.
pub trait Critic: Sync {
    fn review(&self, program: &str, problem: &ProblemContext) -> Result<f64, CriticError>;

    /// Human-readable verdict for explicit-feedback prompting.
    fn feedback(&self, _program: &str, _problem: &ProblemContext) -> Option<String> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    pub program: String,
    pub reward: f64,
    /// `reward[t] - reward[t-1]`; zero for the initial program.
    pub delta: f64,
    pub patience_after: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitReason {
    MaxIterations,
    Patience,
    ActorError,
    CriticError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<StepRecord>,
    pub returned_index: usize,
    pub exit_reason: ExitReason,
    pub error: Option<String>,
}

impl Trajectory {
    pub fn returned(&self) -> &StepRecord {
        &self.steps[self.returned_index]
    }

    pub fn final_index(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn final_patience(&self) -> usize {
        self.steps.last().map_or(0, |s| s.patience_after)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RepairError {
    #[error("initial program is empty")]
    EmptyProgram,
    #[error("max_patience must be at least 1")]
    InvalidPatience,
    #[error("cannot score the initial program: {0}")]
    InitialReview(CriticError),
}

pub fn repair<A: Actor + ?Sized, C: Critic + ?Sized>(
    x0: &str,
    problem: &ProblemContext,
    sample_index: usize,
    actor: &A,
    critic: &C,
    cfg: &LoopConfig,
) -> Result<Trajectory, RepairError> {
    if x0.is_empty() {
        return Err(RepairError::EmptyProgram);
    }
    if cfg.max_patience == 0 {
        return Err(RepairError::InvalidPatience);
    }
    let r0 = critic.review(x0, problem).map_err(RepairError::InitialReview)?;
    let mut steps = vec![StepRecord {
        index: 0,
        program: x0.to_string(),
        reward: r0,
        delta: 0.0,
        patience_after: 0,
    }];

    let mut t = 0;
    let mut p = 0;
    let mut error = None;
    let exit_reason = loop {
        if p >= cfg.max_patience {
            break ExitReason::Patience;
        }
        if t >= cfg.max_iterations {
            break ExitReason::MaxIterations;
        }
        let current = &steps[t];
        let feedback = if cfg.explicit_feedback {
            critic.feedback(&current.program, problem)
        } else {
            None
        };
        let ctx = ActorContext {
            problem,
            sample_index,
            step: t,
            feedback: feedback.as_deref(),
        };
        let next = match actor.next(&current.program, &ctx) {
            Ok(next) => next,
            Err(e) => {
                error = Some(e.to_string());
                break ExitReason::ActorError;
            }
        };
        let reward = match critic.review(&next, problem) {
            Ok(r) => r,
            Err(e) => {
                error = Some(e.to_string());
                break ExitReason::CriticError;
            }
        };
        let delta = reward - current.reward;
        if delta <= 0.0 {
            p += 1;
        } else {
            p = 0;
        }
        t += 1;
        steps.push(StepRecord {
            index: t,
            program: next,
            reward,
            delta,
            patience_after: p,
        });
    };

    let returned_index = match cfg.return_mode {
        ReturnMode::Faithful => t - p,
        ReturnMode::BestOfTrajectory => best_index(&steps),
    };
    Ok(Trajectory {
        steps,
        returned_index,
        exit_reason,
        error,
    })
}

fn best_index(steps: &[StepRecord]) -> usize {
    let mut best = 0;
    for (i, s) in steps.iter().enumerate() {
        if s.reward > steps[best].reward {
            best = i;
        }
    }
    best
}

/// One item of a repair batch.
#[derive(Debug, Clone, PartialEq)]
pub struct RepairInput {
    pub program: String,
    pub problem: ProblemContext,
    pub sample_index: usize,
}

/// Repair every input independently, up to `parallelism` at a time.
/// Results are in input order; one failing item never affects the others.
pub fn repair_batch<A: Actor + ?Sized, C: Critic + ?Sized>(
    inputs: &[RepairInput],
    actor: &A,
    critic: &C,
    cfg: &LoopConfig,
    parallelism: usize,
) -> Vec<Result<Trajectory, RepairError>> {
    let run = |input: &RepairInput| repair(&input.program, &input.problem, input.sample_index, actor, critic, cfg);
    let workers = parallelism.max(1).min(inputs.len());
    if workers <= 1 {
        return inputs.iter().map(run).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<Trajectory, RepairError>>>> = inputs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(input) = inputs.get(i) else { break };
                *slots[i].lock().unwrap() = Some(run(input));
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().unwrap().expect("every slot is filled"))
        .collect()
}

/// Actor that walks through a fixed list of versions: the proposal made
/// from step `t` is `versions[t]`. Past the end it fails.
#[derive(Debug, Clone)]
pub struct SequenceActor {
    pub versions: Vec<String>,
}

impl Actor for SequenceActor {
    fn next(&self, _program: &str, ctx: &ActorContext<'_>) -> Result<String, ActorError> {
        self.versions
            .get(ctx.step)
            .cloned()
            .ok_or_else(|| ActorError(format!("no scripted version for step {}", ctx.step + 1)))
    }
}

/// Critic that looks programs up in a table.
#[derive(Debug, Clone, Default)]
pub struct TableCritic {
    pub rewards: HashMap<String, f64>,
}

impl Critic for TableCritic {
    fn review(&self, program: &str, _problem: &ProblemContext) -> Result<f64, CriticError> {
        self.rewards
            .get(program)
            .copied()
            .ok_or_else(|| CriticError(format!("no reward for `{program}`")))
    }
}

/// Run the loop over a scripted reward sequence: version `i` is the program
/// `x{i}` and scores `rewards[i]`. Proposals beyond the sequence fail like
/// an unreachable actor.
pub fn trace_rewards(rewards: &[f64], cfg: &LoopConfig) -> Result<Trajectory, RepairError> {
    let names: Vec<String> = (0..rewards.len().max(1)).map(|i| format!("x{i}")).collect();
    let actor = SequenceActor {
        versions: names[1..].to_vec(),
    };
    let critic = TableCritic {
        rewards: names.iter().cloned().zip(rewards.iter().copied()).collect(),
    };
    repair(&names[0], &ProblemContext::default(), 0, &actor, &critic, cfg)
}
