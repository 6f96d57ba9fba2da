//! Policy-gradient training of an editing policy on a synthetic repair task.
//!
//! Each step is rewarded with the change in critic reward minus a KL penalty
//! towards a frozen reference policy.

mod env;
pub mod exact;
mod policy;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use env::{distance_level, symbol_char, EditAction, RepairEnv, StartState, ToyProgram, MAX_ALPHABET, MAX_PROGRAM_LEN};
pub use policy::SoftmaxPolicy;
pub use train::{
    evaluate_policy, returns_to_go, rollout, train_policy, write_curve_csv, CurvePoint, Episode, EvalStats, Transition,
};

#[derive(Debug, Error)]
pub enum RlError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training diverged at episode {episode}: non-finite policy parameters")]
    Diverged { episode: usize },
    #[error("malformed checkpoint: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-step reward: critic improvement minus `beta` times the log-ratio of
/// the current policy to the reference on the action taken.
pub fn step_reward(r_next: f64, r_prev: f64, logp_new: f64, logp_ref: f64, beta: f64) -> f64 {
    (r_next - r_prev) - beta * (logp_new - logp_ref)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlConfig {
    pub beta: f64,
    pub learning_rate: f64,
    pub episodes: usize,
    /// Episodes per gradient update; their mean return is the baseline.
    pub batch_episodes: usize,
    pub max_steps: usize,
    pub seed: u64,
    /// Episodes averaged into one learning-curve point.
    pub curve_window: usize,
    /// Rescale each update so its Euclidean norm is at most this.
    /// Written as `false` when clipping is off.
    #[serde(with = "clip_or_false")]
    pub max_grad_norm: Option<f64>,
}

/// A missing key means the default clip, so "no clip" needs its own value.
mod clip_or_false {
    use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Off(bool),
        Norm(f64),
    }

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(c) => Repr::Norm(*c),
            None => Repr::Off(false),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Norm(c) => Ok(Some(c)),
            Repr::Off(false) => Ok(None),
            Repr::Off(true) => Err(de::Error::custom("max_grad_norm takes a number or false")),
        }
    }
}

impl Default for RlConfig {
    fn default() -> Self {
        Self {
            beta: 0.02,
            learning_rate: 2.0,
            episodes: 4000,
            batch_episodes: 16,
            max_steps: 4,
            seed: 0,
            curve_window: 200,
            max_grad_norm: Some(1.0),
        }
    }
}

impl RlConfig {
    pub fn validate(&self) -> Result<(), RlError> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(RlError::Config(format!("beta must be finite and non-negative, got {}", self.beta)));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(RlError::Config(format!("learning rate must be non-negative, got {}", self.learning_rate)));
        }
        if self.episodes == 0 || self.batch_episodes == 0 || self.max_steps == 0 || self.curve_window == 0 {
            return Err(RlError::Config("episodes, batch_episodes, max_steps and curve_window must be positive".into()));
        }
        if let Some(c) = self.max_grad_norm {
            if !(c.is_finite() && c > 0.0) {
                return Err(RlError::Config(format!("max_grad_norm must be positive, got {c}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn disabled_clip_survives_json() {
        let cfg = RlConfig {
            max_grad_norm: None,
            ..RlConfig::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"max_grad_norm\":false"));
        assert_eq!(serde_json::from_str::<RlConfig>(&text).unwrap(), cfg);
        let on: RlConfig = serde_json::from_str(r#"{"max_grad_norm": 2}"#).unwrap();
        assert_eq!(on.max_grad_norm, Some(2.0));
        assert!(serde_json::from_str::<RlConfig>(r#"{"max_grad_norm": true}"#).is_err());
        assert!(serde_json::from_str::<RlConfig>(r#"{"beat": 1}"#).is_err());
    }

    #[test]
    fn step_reward_examples() {
        assert_eq!(step_reward(4.0, 3.0, -1.0, -1.0, 0.5), 1.0);
        assert_eq!(step_reward(3.0, 3.0, -0.5, -1.5, 2.0), -2.0);
        assert_eq!(step_reward(2.0, 3.0, -2.0, -1.0, 0.0), -1.0);
        assert!((step_reward(3.0, 1.0, 0.0, -1.0, 0.02) - 1.98).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn linear_in_beta(
            r1 in -5.0..5.0f64, r0 in -5.0..5.0f64,
            lp in -10.0..0.0f64, lq in -10.0..0.0f64,
            b1 in 0.0..10.0f64, b2 in 0.0..10.0f64,
        ) {
            let f = |b| step_reward(r1, r0, lp, lq, b);
            let mid = f((b1 + b2) / 2.0);
            prop_assert!((mid - (f(b1) + f(b2)) / 2.0).abs() < 1e-9);
            prop_assert!((f(b1) - f(0.0) + b1 * (lp - lq)).abs() < 1e-9);
            prop_assert_eq!(f(0.0), r1 - r0);
        }
    }

    #[test]
    fn config_validation() {
        assert!(RlConfig::default().validate().is_ok());
        let bad = RlConfig {
            beta: -1.0,
            ..RlConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = RlConfig {
            episodes: 0,
            ..RlConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = RlConfig {
            learning_rate: f64::NAN,
            ..RlConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
