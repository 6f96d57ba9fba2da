use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{step_reward, EditAction, RepairEnv, RlConfig, RlError, SoftmaxPolicy, ToyProgram};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub mask: Vec<bool>,
    pub reward_before: f64,
    pub reward_after: f64,
    pub logp: f64,
    pub logp_ref: f64,
    pub step_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub transitions: Vec<Transition>,
    pub start_reward: f64,
    pub final_reward: f64,
    pub final_program: ToyProgram,
}

impl Episode {
    pub fn total_reward(&self) -> f64 {
        self.transitions.iter().map(|t| t.step_reward).sum()
    }

    /// Mean exact KL to the reference over the states visited.
    pub fn mean_kl(&self, policy: &SoftmaxPolicy) -> f64 {
        if self.transitions.is_empty() {
            return 0.0;
        }
        self.transitions
            .iter()
            .map(|t| policy.kl_to_reference(t.state, Some(&t.mask)))
            .sum::<f64>()
            / self.transitions.len() as f64
    }
}

/// Run one episode: edit until the policy stops or `max_steps` is reached.
pub fn rollout<R: rand::Rng + ?Sized>(
    env: &RepairEnv,
    policy: &SoftmaxPolicy,
    beta: f64,
    max_steps: usize,
    rng: &mut R,
) -> Episode {
    let mut program = env.start(rng);
    let start_reward = env.reward(&program);
    let mut r_prev = start_reward;
    let mut transitions = Vec::new();
    for _ in 0..max_steps {
        let state = env.state_of(&program);
        let mask = env.valid_mask(&program);
        let action = policy.sample(state, Some(&mask), rng);
        let logp = policy.log_prob(state, action, Some(&mask));
        let logp_ref = policy.reference_log_prob(state, action, Some(&mask));
        let edit = env.action(action);
        let next = env.apply(&program, edit);
        let r_next = env.reward(&next);
        transitions.push(Transition {
            state,
            action,
            mask,
            reward_before: r_prev,
            reward_after: r_next,
            logp,
            logp_ref,
            step_reward: step_reward(r_next, r_prev, logp, logp_ref, beta),
        });
        program = next;
        r_prev = r_next;
        if edit == EditAction::Stop {
            break;
        }
    }
    Episode {
        transitions,
        start_reward,
        final_reward: r_prev,
        final_program: program,
    }
}

pub fn returns_to_go(rewards: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (i, r) in rewards.iter().enumerate().rev() {
        acc += r;
        out[i] = acc;
    }
    out
}

/// Add `weight * advantage_t * grad log pi(a_t | s_t)` for each step.
pub(crate) fn add_score_terms(
    policy: &SoftmaxPolicy,
    steps: &[(usize, usize, Option<&[bool]>)],
    advantages: &[f64],
    weight: f64,
    grad: &mut [f64],
) {
    for (&(state, action, mask), adv) in steps.iter().zip(advantages) {
        let g = policy.grad_log_prob(state, action, mask);
        let off = policy.offset(state);
        for (j, gj) in g.iter().enumerate() {
            grad[off + j] += weight * adv * gj;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Number of episodes completed at the end of the window.
    pub episode: usize,
    pub mean_reward: f64,
    pub mean_return: f64,
    pub mean_kl: f64,
}

/// REINFORCE with returns-to-go and the batch mean return as baseline.
/// Starts from a uniform policy, which is also the reference.
pub fn train_policy(env: &RepairEnv, cfg: &RlConfig) -> Result<(SoftmaxPolicy, Vec<CurvePoint>), RlError> {
    cfg.validate()?;
    let mut policy = SoftmaxPolicy::uniform(env.num_states(), env.num_actions());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut curve = Vec::new();
    let mut window = Vec::with_capacity(cfg.curve_window);
    let mut done = 0;

    while done < cfg.episodes {
        let batch = cfg.batch_episodes.min(cfg.episodes - done);
        let episodes: Vec<Episode> = (0..batch)
            .map(|_| rollout(env, &policy, cfg.beta, cfg.max_steps, &mut rng))
            .collect();
        let returns: Vec<Vec<f64>> = episodes
            .iter()
            .map(|e| returns_to_go(&e.transitions.iter().map(|t| t.step_reward).collect::<Vec<_>>()))
            .collect();
        if returns.iter().flatten().any(|v| !v.is_finite()) {
            return Err(RlError::Diverged { episode: done + batch - 1 });
        }
        let count: usize = returns.iter().map(Vec::len).sum();
        let baseline = if count == 0 { 0.0 } else { returns.iter().flatten().sum::<f64>() / count as f64 };

        for e in &episodes {
            window.push((e.final_reward, e.total_reward(), e.mean_kl(&policy)));
            if window.len() == cfg.curve_window {
                curve.push(curve_point(&window));
                window.clear();
            }
        }

        let mut grad = vec![0.0; policy.logits().len()];
        for (e, g) in episodes.iter().zip(&returns) {
            let steps: Vec<_> = e.transitions.iter().map(|t| (t.state, t.action, Some(t.mask.as_slice()))).collect();
            let adv: Vec<f64> = g.iter().map(|v| v - baseline).collect();
            add_score_terms(&policy, &steps, &adv, 1.0 / batch as f64, &mut grad);
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let scale = match cfg.max_grad_norm {
            Some(c) if norm > c => c / norm,
            _ => 1.0,
        };
        for (w, g) in policy.logits_mut().iter_mut().zip(&grad) {
            *w += cfg.learning_rate * scale * g;
        }
        done += batch;
        if !policy.is_finite() {
            return Err(RlError::Diverged { episode: done - 1 });
        }
    }
    if !window.is_empty() {
        curve.push(curve_point(&window));
    }
    for (i, p) in curve.iter_mut().enumerate() {
        p.episode = ((i + 1) * cfg.curve_window).min(done);
    }
    Ok((policy, curve))
}

fn curve_point(window: &[(f64, f64, f64)]) -> CurvePoint {
    let n = window.len() as f64;
    CurvePoint {
        episode: 0,
        mean_reward: window.iter().map(|w| w.0).sum::<f64>() / n,
        mean_return: window.iter().map(|w| w.1).sum::<f64>() / n,
        mean_kl: window.iter().map(|w| w.2).sum::<f64>() / n,
    }
}

pub fn write_curve_csv<W: Write>(curve: &[CurvePoint], mut w: W) -> Result<(), RlError> {
    writeln!(w, "episode,mean_reward,mean_return,mean_kl")?;
    for p in curve {
        writeln!(w, "{},{:.6},{:.6},{:.6}", p.episode, p.mean_reward, p.mean_return, p.mean_kl)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub episodes: usize,
    /// Mean critic reward of the final program.
    pub mean_final_reward: f64,
    /// Mean sum of per-step rewards.
    pub mean_return: f64,
    pub mean_kl: f64,
    pub solved_fraction: f64,
}

pub fn evaluate_policy(
    env: &RepairEnv,
    policy: &SoftmaxPolicy,
    beta: f64,
    max_steps: usize,
    episodes: usize,
    seed: u64,
) -> EvalStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut fin, mut ret, mut kl, mut solved) = (0.0, 0.0, 0.0, 0usize);
    for _ in 0..episodes {
        let e = rollout(env, policy, beta, max_steps, &mut rng);
        fin += e.final_reward;
        ret += e.total_reward();
        kl += e.mean_kl(policy);
        solved += usize::from(e.final_program.0 == env.target());
    }
    let n = episodes.max(1) as f64;
    EvalStats {
        episodes,
        mean_final_reward: fin / n,
        mean_return: ret / n,
        mean_kl: kl / n,
        solved_fraction: solved as f64 / n,
    }
}
