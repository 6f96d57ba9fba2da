//! Process-based program repair: a judge sandbox, partial-order rewards,
//! the iterative actor-critic repair loop, a toy KL-regularised policy
//! gradient, pass@k evaluation and repair-chain dataset curation.

pub mod dataset;
pub mod evaluation;
pub mod repair_loop;
pub mod reward;
pub mod rl_toy;
pub mod sandbox;
pub mod status;

pub use status::{prefer, status_rank, Preference, Status};
