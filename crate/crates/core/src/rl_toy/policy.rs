use std::io::{BufRead, Write};

use rand::Rng;

use super::RlError;

/// Tabular softmax policy with a frozen reference copy of its initial logits.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxPolicy {
    n_states: usize,
    n_actions: usize,
    logits: Vec<f64>,
    reference: Vec<f64>,
}

impl SoftmaxPolicy {
    /// Uniform policy; the reference is the same uniform table.
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self::from_logits(n_states, n_actions, vec![0.0; n_states * n_actions]).expect("shape matches")
    }

    pub fn from_logits(n_states: usize, n_actions: usize, logits: Vec<f64>) -> Result<Self, RlError> {
        if n_states == 0 || n_actions == 0 || logits.len() != n_states * n_actions {
            return Err(RlError::Config(format!(
                "logit table of length {} does not match {n_states} x {n_actions}",
                logits.len()
            )));
        }
        Ok(Self {
            n_states,
            n_actions,
            reference: logits.clone(),
            logits,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn reference_logits(&self) -> &[f64] {
        &self.reference
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn logits_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }

    pub fn is_finite(&self) -> bool {
        self.logits.iter().all(|v| v.is_finite())
    }

    /// Action probabilities in `state`; masked actions get zero.
    pub fn probs(&self, state: usize, mask: Option<&[bool]>) -> Vec<f64> {
        masked_softmax(self.row(&self.logits, state), mask)
    }

    pub fn reference_probs(&self, state: usize, mask: Option<&[bool]>) -> Vec<f64> {
        masked_softmax(self.row(&self.reference, state), mask)
    }

    pub fn log_prob(&self, state: usize, action: usize, mask: Option<&[bool]>) -> f64 {
        self.probs(state, mask)[action].ln()
    }

    pub fn reference_log_prob(&self, state: usize, action: usize, mask: Option<&[bool]>) -> f64 {
        self.reference_probs(state, mask)[action].ln()
    }

    /// KL(policy || reference) over the valid actions of `state`.
    pub fn kl_to_reference(&self, state: usize, mask: Option<&[bool]>) -> f64 {
        let p = self.probs(state, mask);
        let q = self.reference_probs(state, mask);
        p.iter()
            .zip(&q)
            .filter(|(pi, _)| **pi > 0.0)
            .map(|(pi, qi)| pi * (pi.ln() - qi.ln()))
            .sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, state: usize, mask: Option<&[bool]>, rng: &mut R) -> usize {
        let p = self.probs(state, mask);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last_valid = 0;
        for (a, pa) in p.iter().enumerate() {
            if *pa > 0.0 {
                last_valid = a;
                acc += pa;
                if u < acc {
                    return a;
                }
            }
        }
        last_valid
    }

    /// Gradient of `log pi(action | state)` with respect to the logits of
    /// `state`: `onehot(action) - pi(. | state)` on the valid actions.
    pub fn grad_log_prob(&self, state: usize, action: usize, mask: Option<&[bool]>) -> Vec<f64> {
        let mut g: Vec<f64> = self.probs(state, mask).iter().map(|p| -p).collect();
        g[action] += 1.0;
        g
    }

    /// Index of the first logit of `state` in the flat table.
    pub fn offset(&self, state: usize) -> usize {
        state * self.n_actions
    }

    fn row<'a>(&self, table: &'a [f64], state: usize) -> &'a [f64] {
        &table[state * self.n_actions..(state + 1) * self.n_actions]
    }

    /// Checkpoint: a header line, a shape line, then one row of logits per state.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), RlError> {
        writeln!(w, "stepfix-policy 1")?;
        writeln!(w, "shape {} {}", self.n_states, self.n_actions)?;
        for s in 0..self.n_states {
            let row: Vec<String> = self.row(&self.logits, s).iter().map(|v| format!("{v:e}")).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }

    /// Load a checkpoint. The loaded logits also become the reference.
    pub fn read_from<R: BufRead>(r: R) -> Result<Self, RlError> {
        let mut lines = r.lines();
        let mut next = || -> Result<String, RlError> {
            lines
                .next()
                .ok_or_else(|| RlError::Format("truncated policy checkpoint".into()))?
                .map_err(RlError::from)
        };
        if next()?.trim() != "stepfix-policy 1" {
            return Err(RlError::Format("not a policy checkpoint".into()));
        }
        let shape = next()?;
        let dims: Vec<usize> = shape
            .strip_prefix("shape ")
            .ok_or_else(|| RlError::Format("missing shape line".into()))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| RlError::Format(format!("bad shape `{shape}`"))))
            .collect::<Result<_, _>>()?;
        let [n_states, n_actions] = dims[..] else {
            return Err(RlError::Format(format!("bad shape `{shape}`")));
        };
        let mut logits = Vec::with_capacity(n_states * n_actions);
        for s in 0..n_states {
            let line = next()?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| RlError::Format(format!("bad logit `{t}` in state {s}"))))
                .collect::<Result<_, _>>()?;
            if row.len() != n_actions {
                return Err(RlError::Format(format!("state {s} has {} logits, expected {n_actions}", row.len())));
            }
            logits.extend(row);
        }
        Self::from_logits(n_states, n_actions, logits)
    }
}

fn masked_softmax(logits: &[f64], mask: Option<&[bool]>) -> Vec<f64> {
    let valid = |a: usize| mask.is_none_or(|m| m[a]);
    let max = logits
        .iter()
        .enumerate()
        .filter(|(a, _)| valid(*a))
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits
        .iter()
        .enumerate()
        .map(|(a, v)| if valid(a) { (v - max).exp() } else { 0.0 })
        .collect();
    let z: f64 = out.iter().sum();
    for p in &mut out {
        *p /= z;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_over_valid_actions() {
        let pi = SoftmaxPolicy::uniform(2, 4);
        let mask = [true, false, true, true];
        let p = pi.probs(1, Some(&mask));
        assert_eq!(p[1], 0.0);
        for a in [0, 2, 3] {
            assert!((p[a] - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(pi.kl_to_reference(0, None), 0.0);
    }

    #[test]
    fn sampling_follows_probabilities() {
        let pi = SoftmaxPolicy::from_logits(1, 3, vec![0.0, 2f64.ln(), f64::NEG_INFINITY]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts = [0usize; 3];
        let n = 30_000;
        for _ in 0..n {
            counts[pi.sample(0, None, &mut rng)] += 1;
        }
        assert_eq!(counts[2], 0);
        let frac = counts[1] as f64 / n as f64;
        assert!((frac - 2.0 / 3.0).abs() < 0.015, "{frac}");
    }

    #[test]
    fn grad_log_prob_matches_finite_differences() {
        let mut pi = SoftmaxPolicy::from_logits(1, 4, vec![0.3, -0.2, 1.1, 0.0]).unwrap();
        let mask = [true, true, false, true];
        let g = pi.grad_log_prob(0, 1, Some(&mask));
        let h = 1e-6;
        for j in 0..4 {
            let base = pi.logits()[j];
            pi.logits_mut()[j] = base + h;
            let up = pi.log_prob(0, 1, Some(&mask));
            pi.logits_mut()[j] = base - h;
            let down = pi.log_prob(0, 1, Some(&mask));
            pi.logits_mut()[j] = base;
            assert!((g[j] - (up - down) / (2.0 * h)).abs() < 1e-8, "logit {j}");
        }
    }

    #[test]
    fn kl_is_positive_after_a_change() {
        let mut pi = SoftmaxPolicy::uniform(1, 3);
        pi.logits_mut()[0] = 1.0;
        let p = pi.probs(0, None);
        let expected: f64 = p.iter().map(|x| x * (x * 3.0).ln()).sum();
        assert!((pi.kl_to_reference(0, None) - expected).abs() < 1e-15);
        assert!(expected > 0.0);
    }

    #[test]
    fn checkpoint_round_trip() {
        let pi = SoftmaxPolicy::from_logits(2, 3, vec![0.1, -1.5, 3.25, 0.0, 1e-9, -7.0]).unwrap();
        let mut buf = Vec::new();
        pi.write_to(&mut buf).unwrap();
        let back = SoftmaxPolicy::read_from(buf.as_slice()).unwrap();
        assert_eq!(back.logits(), pi.logits());
        assert!(SoftmaxPolicy::read_from("stepfix-policy 1\nshape 2 3\n0 0 0\n".as_bytes()).is_err());
        assert!(SoftmaxPolicy::read_from("stepfix-policy 1\nshape 1 2\n0 0 0\n".as_bytes()).is_err());
    }
}
