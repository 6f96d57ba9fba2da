//! Harness configuration, read from TOML.
//!
//! Relative paths are resolved against the directory of the config file.
//! Secrets never live here: the remote actor names the environment variable
//! that holds its token.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stepfix::dataset::CurationConfig;
use stepfix::repair_loop::LoopConfig;
use stepfix::reward::LossKind;
use stepfix::rl_toy::RlConfig;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub seed: u64,
    pub parallelism: usize,
    /// Repair samples per problem; pass@k needs `k <= samples_per_problem`.
    pub samples_per_problem: usize,
    #[serde(rename = "loop")]
    pub loop_cfg: LoopConfig,
    pub sampling: SamplingConfig,
    pub critic: CriticBackend,
    pub actor: ActorBackend,
    pub paths: PathsConfig,
    pub train_rm: RankerTrainingConfig,
    pub curate: CurateConfig,
    pub rl_toy: RlConfig,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            parallelism: 1,
            samples_per_problem: 5,
            loop_cfg: LoopConfig::default(),
            sampling: SamplingConfig::default(),
            critic: CriticBackend::Oracle,
            actor: ActorBackend::Mutation(MutationConfig::default()),
            paths: PathsConfig::default(),
            train_rm: RankerTrainingConfig::default(),
            curate: CurateConfig::default(),
            rl_toy: RlConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub temperature: f64,
    pub top_p: f64,
    pub top_k: u32,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            temperature: 0.2,
            top_p: 0.95,
            top_k: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CriticBackend {
    /// Execute against the problem's tests.
    Oracle,
    /// Score with a trained ranker file.
    LearnedRanker { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActorBackend {
    Remote(RemoteConfig),
    Mock { script: PathBuf },
    Mutation(MutationConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub auth_env: String,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_retries() -> u32 {
    3
}

fn default_backoff_ms() -> u64 {
    500
}

fn default_timeout_ms() -> u64 {
    60_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MutationConfig {
    /// Falls back to the harness seed.
    pub seed: Option<u64>,
    /// Chance that each mutable token is edited; one edit is always made.
    pub edit_rate: f64,
}

impl Default for MutationConfig {
    fn default() -> Self {
        Self {
            seed: None,
            edit_rate: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// One folder per problem with `problem.toml` and `tests/`.
    pub problems: PathBuf,
    /// Curated repair records, one JSON object per line.
    pub corpus: PathBuf,
    pub runs: PathBuf,
    pub reports: PathBuf,
    /// Prompt template; the built-in one when unset.
    pub prompt_template: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            problems: "problems".into(),
            corpus: "corpus/records.jsonl".into(),
            runs: "runs".into(),
            reports: "reports".into(),
            prompt_template: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankerTrainingConfig {
    /// Programs per comparison batch.
    pub k: usize,
    /// Comparison batches per step.
    pub batch_size: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub loss: LossKind,
    pub hash_dim: usize,
}

impl Default for RankerTrainingConfig {
    fn default() -> Self {
        Self {
            k: 9,
            batch_size: 64,
            steps: 50,
            learning_rate: 0.05,
            loss: LossKind::Pair,
            hash_dim: stepfix::reward::DEFAULT_HASH_DIM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurateConfig {
    pub min_versions: usize,
    pub train_parts: usize,
    pub test_parts: usize,
    /// Malicious-code rules; the built-in set when unset.
    pub rules: Option<PathBuf>,
}

impl Default for CurateConfig {
    fn default() -> Self {
        Self {
            min_versions: 2,
            train_parts: 9,
            test_parts: 1,
            rules: None,
        }
    }
}

impl CurateConfig {
    pub fn curation(&self, parallelism: usize) -> CurationConfig {
        CurationConfig {
            min_versions: self.min_versions,
            parallelism,
        }
    }
}

impl HarnessConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Parse `path` and resolve its relative paths against its folder.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.problems);
        fix(&mut self.paths.corpus);
        fix(&mut self.paths.runs);
        fix(&mut self.paths.reports);
        if let Some(p) = self.paths.prompt_template.as_mut() {
            fix(p);
        }
        if let Some(p) = self.curate.rules.as_mut() {
            fix(p);
        }
        match &mut self.critic {
            CriticBackend::LearnedRanker { path } => fix(path),
            CriticBackend::Oracle => {}
        }
        if let ActorBackend::Mock { script } = &mut self.actor {
            fix(script);
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: &str| Err(CliError::Config(msg.to_string()));
        if self.parallelism == 0 {
            return bad("parallelism must be at least 1");
        }
        if self.samples_per_problem == 0 {
            return bad("samples_per_problem must be at least 1");
        }
        if self.loop_cfg.max_patience == 0 {
            return bad("loop.max_patience must be at least 1");
        }
        let s = &self.sampling;
        if !(s.temperature.is_finite() && s.temperature >= 0.0) {
            return bad("sampling.temperature must be non-negative");
        }
        if !(s.top_p > 0.0 && s.top_p <= 1.0) {
            return bad("sampling.top_p must be in (0, 1]");
        }
        if let ActorBackend::Mutation(m) = &self.actor {
            if !(0.0..=1.0).contains(&m.edit_rate) {
                return bad("actor.edit_rate must be in [0, 1]");
            }
        }
        if let ActorBackend::Remote(r) = &self.actor {
            if r.auth_env.trim().is_empty() {
                return bad("actor.auth_env must name an environment variable");
            }
        }
        if self.train_rm.k < 2 || self.train_rm.batch_size == 0 || self.train_rm.hash_dim == 0 {
            return bad("train_rm needs k >= 2, batch_size >= 1 and hash_dim >= 1");
        }
        if self.curate.train_parts + self.curate.test_parts == 0 {
            return bad("curate split ratio has no parts");
        }
        self.rl_toy
            .validate()
            .map_err(|e| CliError::Config(format!("rl_toy: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let cfg = HarnessConfig::from_toml("").unwrap();
        assert_eq!(cfg.sampling.temperature, 0.2);
        assert_eq!(cfg.sampling.top_p, 0.95);
        assert_eq!(cfg.sampling.top_k, 50);
        assert_eq!(cfg.loop_cfg.max_iterations, 5);
        assert_eq!(cfg.loop_cfg.max_patience, 2);
        assert_eq!(cfg.train_rm.k, 9);
        assert_eq!(cfg.train_rm.batch_size, 64);
        assert_eq!(cfg.samples_per_problem, 5);
    }

    #[test]
    fn backends_parse() {
        let cfg = HarnessConfig::from_toml(
            r#"
            [actor]
            kind = "remote"
            endpoint = "http://localhost:8080/v1/chat/completions"
            model = "coder"
            auth_env = "REPAIR_TOKEN"

            [critic]
            kind = "learned_ranker"
            path = "ranker.txt"
            "#,
        )
        .unwrap();
        match &cfg.actor {
            ActorBackend::Remote(r) => {
                assert_eq!(r.max_retries, 3);
                assert_eq!(r.auth_env, "REPAIR_TOKEN");
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(cfg.critic, CriticBackend::LearnedRanker { path: "ranker.txt".into() });
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "parallelism = 0",
            "[loop]\nmax_patience = 0",
            "[sampling]\ntop_p = 1.5",
            "[actor]\nkind = \"mutation\"\nedit_rate = 2.0",
            "[rl_toy]\nepisodes = 0",
            "unknown = 1",
        ] {
            assert!(matches!(HarnessConfig::from_toml(text), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let mut cfg = HarnessConfig::from_toml("[actor]\nkind = \"mock\"\nscript = \"s.json\"").unwrap();
        cfg.resolve_paths(Path::new("/base"));
        assert_eq!(cfg.paths.problems, Path::new("/base/problems"));
        assert_eq!(cfg.actor, ActorBackend::Mock { script: "/base/s.json".into() });
    }
}
