//! pass@k, difficulty tiers and edit-distance analysis of repair chains.

mod distance;
mod pass_at_k;
mod report;
mod tiers;

pub use distance::{chain_distance_analysis, edit_distance, ChainDistanceSummary, ChainDistances};
pub use pass_at_k::{pass_at_k, pass_at_k_product};
pub use report::{PassAtKReport, ProblemRow, SampleBatch, TierRow, REPORTED_KS};
pub use tiers::{stratify, DifficultyTier};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("invalid argument: {0}")]
    Argument(String),
}
