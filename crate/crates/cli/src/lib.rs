//! Experiment harness around the `stepfix` library: configuration, actor and
//! critic backends, trajectory logs and one function per CLI verb.

pub mod actors;
pub mod commands;
pub mod config;
pub mod critics;
pub mod extract;
pub mod prompt;
pub mod store;

pub use config::HarnessConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
    #[error("trajectory store: {0}")]
    Store(String),
    #[error(transparent)]
    Sandbox(#[from] stepfix::sandbox::SandboxError),
    #[error(transparent)]
    Dataset(#[from] stepfix::dataset::DatasetError),
    #[error(transparent)]
    Reward(#[from] stepfix::reward::RewardError),
    #[error(transparent)]
    Eval(#[from] stepfix::evaluation::EvalError),
    #[error(transparent)]
    Rl(#[from] stepfix::rl_toy::RlError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
