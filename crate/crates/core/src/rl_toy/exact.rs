//! Exact objective and policy gradient on a small deterministic MDP, by
//! enumerating every action sequence. Used to check the sampled estimator.

use super::train::{add_score_terms, returns_to_go};
use super::{step_reward, RlError, SoftmaxPolicy};

/// Deterministic MDP with a fixed horizon and a critic reward per state.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    pub n_states: usize,
    pub n_actions: usize,
    /// `next[s * n_actions + a]`.
    pub next: Vec<usize>,
    pub reward: Vec<f64>,
    pub start: usize,
    pub horizon: usize,
}

impl TabularMdp {
    pub fn validate(&self) -> Result<(), RlError> {
        if self.next.len() != self.n_states * self.n_actions
            || self.reward.len() != self.n_states
            || self.start >= self.n_states
            || self.next.iter().any(|&s| s >= self.n_states)
        {
            return Err(RlError::Config("inconsistent MDP tables".into()));
        }
        if (self.n_actions as f64).powi(self.horizon as i32) > 1e7 {
            return Err(RlError::Config("too many trajectories to enumerate".into()));
        }
        Ok(())
    }
}

/// Calls `f(probability, states, actions)` for every trajectory.
fn for_each_trajectory(mdp: &TabularMdp, policy: &SoftmaxPolicy, mut f: impl FnMut(f64, &[usize], &[usize])) {
    let total = mdp.n_actions.pow(mdp.horizon as u32);
    let mut states = Vec::with_capacity(mdp.horizon + 1);
    let mut actions = Vec::with_capacity(mdp.horizon);
    for code in 0..total {
        states.clear();
        actions.clear();
        states.push(mdp.start);
        let mut rest = code;
        let mut prob = 1.0;
        for _ in 0..mdp.horizon {
            let a = rest % mdp.n_actions;
            rest /= mdp.n_actions;
            let s = *states.last().expect("non-empty");
            prob *= policy.probs(s, None)[a];
            actions.push(a);
            states.push(mdp.next[s * mdp.n_actions + a]);
        }
        f(prob, &states, &actions);
    }
}

fn step_rewards(mdp: &TabularMdp, policy: &SoftmaxPolicy, beta: f64, states: &[usize], actions: &[usize]) -> Vec<f64> {
    actions
        .iter()
        .enumerate()
        .map(|(t, &a)| {
            let s = states[t];
            step_reward(
                mdp.reward[states[t + 1]],
                mdp.reward[s],
                policy.log_prob(s, a, None),
                policy.reference_log_prob(s, a, None),
                beta,
            )
        })
        .collect()
}

/// Expected total per-step reward under `policy`.
pub fn objective(mdp: &TabularMdp, policy: &SoftmaxPolicy, beta: f64) -> Result<f64, RlError> {
    mdp.validate()?;
    let mut j = 0.0;
    for_each_trajectory(mdp, policy, |p, states, actions| {
        j += p * step_rewards(mdp, policy, beta, states, actions).iter().sum::<f64>();
    });
    Ok(j)
}

/// Expectation of the returns-to-go score-function estimator used in
/// training, computed exactly.
pub fn policy_gradient(mdp: &TabularMdp, policy: &SoftmaxPolicy, beta: f64) -> Result<Vec<f64>, RlError> {
    mdp.validate()?;
    let mut grad = vec![0.0; policy.logits().len()];
    for_each_trajectory(mdp, policy, |p, states, actions| {
        let g = returns_to_go(&step_rewards(mdp, policy, beta, states, actions));
        let steps: Vec<_> = actions.iter().enumerate().map(|(t, &a)| (states[t], a, None)).collect();
        add_score_terms(policy, &steps, &g, p, &mut grad);
    });
    Ok(grad)
}
