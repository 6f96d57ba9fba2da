//! Program-quality rewards: the execution-backed oracle critic and a learned
//! linear ranker trained from status comparisons.

mod features;
mod loss;
mod ranker;
pub mod synthetic;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use features::{featurize, featurize_in_context, tokenize, FeatureConfig, FeatureVector, DEFAULT_HASH_DIM};
pub use loss::{
    canonical_order, listwise_loss, listwise_loss_grad, pairwise_loss, pairwise_loss_grad, pointwise_loss,
    pointwise_loss_grad, sigmoid, softplus,
};
pub use ranker::{
    pairwise_accuracy, score, train_ranker, LossKind, RankerParams, TrainConfig, TrainLogEntry,
    PAPER_LEARNING_RATE,
};

use crate::status::Status;

#[derive(Debug, thiserror::Error)]
pub enum RewardError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("training failed: {0}")]
    Training(String),
    #[error("malformed ranker file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct RewardScore(pub f64);

impl RewardScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Scalar reward for a judged program: its rank level, plus half the passed
/// test fraction for the shared WA/TLE/MLE level so more passing tests score
/// higher within that level.
pub fn oracle_critic(status: Status, passed_fraction: f64) -> Result<RewardScore, RewardError> {
    if !(0.0..=1.0).contains(&passed_fraction) {
        return Err(RewardError::Argument(format!(
            "passed fraction {passed_fraction} outside [0, 1]"
        )));
    }
    if status.is_accepted() && passed_fraction < 1.0 {
        return Err(RewardError::Argument(format!(
            "AC requires every test to pass, got fraction {passed_fraction}"
        )));
    }
    let rank = f64::from(status.rank());
    let value = if status.rank() == 2 { rank + 0.5 * passed_fraction } else { rank };
    Ok(RewardScore(value))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgedProgram {
    pub source: String,
    pub status: Status,
}

impl JudgedProgram {
    pub fn new(source: impl Into<String>, status: Status) -> Self {
        Self {
            source: source.into(),
            status,
        }
    }
}

/// A preferred program and the program it beats. The winner's rank is
/// strictly higher.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonPair<'a> {
    pub winner: &'a JudgedProgram,
    pub loser: &'a JudgedProgram,
}

/// K programs for one problem, compared with each other by status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonBatch {
    pub problem_id: String,
    /// Problem text, used only when the feature config asks for context.
    #[serde(default)]
    pub context: Option<String>,
    pub programs: Vec<JudgedProgram>,
}

impl ComparisonBatch {
    pub fn new(problem_id: impl Into<String>, programs: Vec<JudgedProgram>) -> Self {
        Self {
            problem_id: problem_id.into(),
            context: None,
            programs,
        }
    }

    /// Draw `k` distinct programs from a problem's pool.
    pub fn sample<R: Rng + ?Sized>(
        problem_id: &str,
        pool: &[JudgedProgram],
        k: usize,
        rng: &mut R,
    ) -> Self {
        let programs = pool.choose_multiple(rng, k.min(pool.len())).cloned().collect();
        Self::new(problem_id, programs)
    }

    /// Index pairs `(winner, loser)` over every 2-subset whose statuses
    /// differ in rank. Tied statuses give no pair.
    pub fn pair_indices(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for i in 0..self.programs.len() {
            for j in i + 1..self.programs.len() {
                let (ri, rj) = (self.programs[i].status.rank(), self.programs[j].status.rank());
                if ri > rj {
                    pairs.push((i, j));
                } else if rj > ri {
                    pairs.push((j, i));
                }
            }
        }
        pairs
    }

    pub fn pairs(&self) -> Vec<ComparisonPair<'_>> {
        self.pair_indices()
            .into_iter()
            .map(|(w, l)| ComparisonPair {
                winner: &self.programs[w],
                loser: &self.programs[l],
            })
            .collect()
    }

    pub fn shuffled_pair_indices<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<(usize, usize)> {
        let mut pairs = self.pair_indices();
        pairs.shuffle(rng);
        pairs
    }

    /// Number of 2-subsets, `K choose 2`, whether ordered or tied.
    pub fn comparisons(&self) -> usize {
        let k = self.programs.len();
        k * k.saturating_sub(1) / 2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn oracle_critic_examples() {
        assert_eq!(oracle_critic(Status::Accepted, 1.0).unwrap().value(), 4.0);
        assert_eq!(oracle_critic(Status::WrongAnswer, 0.5).unwrap().value(), 2.25);
        assert_eq!(oracle_critic(Status::RuntimeError, 0.0).unwrap().value(), 0.0);
        assert!(oracle_critic(Status::Accepted, 0.9).is_err());
        assert!(oracle_critic(Status::WrongAnswer, 1.5).is_err());
        assert!(oracle_critic(Status::WrongAnswer, f64::NAN).is_err());
    }

    #[test]
    fn oracle_critic_is_monotone_in_rank() {
        let fractions = [0.0, 0.25, 0.5, 0.99];
        for a in Status::ALL {
            for b in Status::ALL {
                if a.rank() <= b.rank() {
                    continue;
                }
                let fa = if a.is_accepted() { vec![1.0] } else { fractions.to_vec() };
                for &x in &fa {
                    for &y in &fractions {
                        let ra = oracle_critic(a, x).unwrap().value();
                        let rb = oracle_critic(b, y).unwrap().value();
                        assert!(ra > rb, "{a}({x}) vs {b}({y})");
                    }
                }
            }
        }
    }

    #[test]
    fn pairs_enumerate_strictly_ordered_subsets() {
        let batch = ComparisonBatch::new(
            "p",
            vec![
                JudgedProgram::new("a", Status::Accepted),
                JudgedProgram::new("w", Status::WrongAnswer),
                JudgedProgram::new("r", Status::RuntimeError),
            ],
        );
        let names: Vec<_> = batch
            .pairs()
            .iter()
            .map(|p| (p.winner.source.as_str(), p.loser.source.as_str()))
            .collect();
        assert_eq!(names, vec![("a", "w"), ("a", "r"), ("w", "r")]);
        assert_eq!(batch.comparisons(), 3);
    }

    #[test]
    fn ties_give_no_pair() {
        let batch = ComparisonBatch::new(
            "p",
            vec![
                JudgedProgram::new("w", Status::WrongAnswer),
                JudgedProgram::new("t", Status::TimeLimitExceeded),
                JudgedProgram::new("m", Status::MemoryLimitExceeded),
                JudgedProgram::new("ac", Status::Accepted),
            ],
        );
        let pairs = batch.pairs();
        assert_eq!(pairs.len(), 3);
        assert!(pairs.iter().all(|p| p.winner.status.rank() > p.loser.status.rank()));
        assert_eq!(batch.comparisons(), 6);
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let programs = Status::ALL.iter().map(|&s| JudgedProgram::new(s.code(), s)).collect();
        let batch = ComparisonBatch::new("p", programs);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut shuffled = batch.shuffled_pair_indices(&mut rng);
        let mut plain = batch.pair_indices();
        shuffled.sort();
        plain.sort();
        assert_eq!(shuffled, plain);
    }
}
