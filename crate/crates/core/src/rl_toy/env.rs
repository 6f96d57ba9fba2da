//! Synthetic repair environment: edit a short symbol string towards a
//! hidden target. The distance to the target plays the role of the judge.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::RlError;
use crate::evaluation::edit_distance;
use crate::reward::oracle_critic;
use crate::status::Status;

pub const MAX_ALPHABET: u8 = 32;
pub const MAX_PROGRAM_LEN: usize = 64;

/// A program at toy scale: symbols `0..alphabet`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ToyProgram(pub Vec<u8>);

impl ToyProgram {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Render with letters `a`, `b`, ... for display and edit distance.
    pub fn render(&self) -> String {
        self.0.iter().map(|&s| symbol_char(s)).collect()
    }
}

pub fn symbol_char(s: u8) -> char {
    if s < 26 {
        (b'a' + s) as char
    } else {
        (b'0' + (s - 26)) as char
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EditAction {
    Substitute { pos: usize, sym: u8 },
    Insert { pos: usize, sym: u8 },
    Delete { pos: usize },
    Stop,
}

/// How episodes start.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StartState {
    Fixed { program: Vec<u8> },
    /// The target with this many positions substituted by a different symbol.
    RandomSubstitutions { count: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairEnv {
    target: Vec<u8>,
    alphabet: u8,
    max_len: usize,
    start: StartState,
}

/// Proxy verdict level for an edit distance: 0 -> 4 (AC), 1 -> 3, 2 -> 2,
/// 3..=4 -> 1, 5 or more -> 0.
pub fn distance_level(distance: usize) -> u8 {
    match distance {
        0 => 4,
        1 => 3,
        2 => 2,
        3 | 4 => 1,
        _ => 0,
    }
}

impl RepairEnv {
    pub fn new(target: Vec<u8>, alphabet: u8, start: StartState) -> Result<Self, RlError> {
        if !(2..=MAX_ALPHABET).contains(&alphabet) {
            return Err(RlError::Config(format!("alphabet size {alphabet} outside 2..={MAX_ALPHABET}")));
        }
        if target.is_empty() || target.len() + 2 > MAX_PROGRAM_LEN {
            return Err(RlError::Config(format!(
                "target length {} outside 1..={}",
                target.len(),
                MAX_PROGRAM_LEN - 2
            )));
        }
        if target.iter().any(|&s| s >= alphabet) {
            return Err(RlError::Config("target uses symbols outside the alphabet".into()));
        }
        match &start {
            StartState::Fixed { program } => {
                if program.is_empty() || program.len() > target.len() + 2 || program.iter().any(|&s| s >= alphabet) {
                    return Err(RlError::Config("fixed start is not a valid program".into()));
                }
            }
            StartState::RandomSubstitutions { count } => {
                if *count > target.len() {
                    return Err(RlError::Config("more substitutions than target symbols".into()));
                }
            }
        }
        Ok(Self {
            max_len: target.len() + 2,
            target,
            alphabet,
            start,
        })
    }

    /// Eight symbols over a four-letter alphabet, one substitution per episode.
    pub fn one_corruption() -> Self {
        Self::new(vec![0, 1, 2, 3, 0, 1, 2, 3], 4, StartState::RandomSubstitutions { count: 1 })
            .expect("valid built-in environment")
    }

    pub fn target(&self) -> &[u8] {
        &self.target
    }

    pub fn alphabet(&self) -> u8 {
        self.alphabet
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn start<R: Rng + ?Sized>(&self, rng: &mut R) -> ToyProgram {
        match &self.start {
            StartState::Fixed { program } => ToyProgram(program.clone()),
            StartState::RandomSubstitutions { count } => {
                let mut program = self.target.clone();
                let positions = rand::seq::index::sample(rng, self.target.len(), *count);
                for pos in positions {
                    let shift = rng.random_range(1..self.alphabet);
                    program[pos] = (program[pos] + shift) % self.alphabet;
                }
                ToyProgram(program)
            }
        }
    }

    pub fn distance(&self, program: &ToyProgram) -> usize {
        let target = ToyProgram(self.target.clone());
        edit_distance(&program.render(), &target.render())
    }

    /// Oracle-critic reward of the proxy verdict. The passed fraction is the
    /// share of the target length already matched.
    pub fn reward(&self, program: &ToyProgram) -> f64 {
        let d = self.distance(program);
        let status = Status::from_rank(distance_level(d)).expect("level in 0..=4");
        let fraction = (1.0 - d as f64 / self.target.len() as f64).max(0.0);
        oracle_critic(status, fraction).expect("consistent verdict").value()
    }

    pub fn num_actions(&self) -> usize {
        let l = self.max_len;
        let a = self.alphabet as usize;
        2 * l * a + l + 1
    }

    /// Action index layout: substitutions, insertions, deletions, stop.
    pub fn action(&self, index: usize) -> EditAction {
        let l = self.max_len;
        let a = self.alphabet as usize;
        if index < l * a {
            EditAction::Substitute {
                pos: index / a,
                sym: (index % a) as u8,
            }
        } else if index < 2 * l * a {
            let i = index - l * a;
            EditAction::Insert {
                pos: i / a,
                sym: (i % a) as u8,
            }
        } else if index < 2 * l * a + l {
            EditAction::Delete { pos: index - 2 * l * a }
        } else {
            EditAction::Stop
        }
    }

    pub fn is_valid(&self, program: &ToyProgram, action: EditAction) -> bool {
        let len = program.len();
        match action {
            EditAction::Substitute { pos, sym } => pos < len && sym < self.alphabet && program.0[pos] != sym,
            EditAction::Insert { pos, sym } => pos <= len && len < self.max_len && sym < self.alphabet,
            EditAction::Delete { pos } => pos < len && len > 1,
            EditAction::Stop => true,
        }
    }

    pub fn valid_mask(&self, program: &ToyProgram) -> Vec<bool> {
        (0..self.num_actions()).map(|i| self.is_valid(program, self.action(i))).collect()
    }

    pub fn apply(&self, program: &ToyProgram, action: EditAction) -> ToyProgram {
        let mut p = program.0.clone();
        match action {
            EditAction::Substitute { pos, sym } => p[pos] = sym,
            EditAction::Insert { pos, sym } => p.insert(pos, sym),
            EditAction::Delete { pos } => {
                p.remove(pos);
            }
            EditAction::Stop => {}
        }
        ToyProgram(p)
    }

    /// Number of (distance level, first mismatch position) buckets.
    pub fn num_states(&self) -> usize {
        5 * (self.max_len + 1)
    }

    pub fn state_of(&self, program: &ToyProgram) -> usize {
        let level = distance_level(self.distance(program)) as usize;
        let mismatch = program
            .0
            .iter()
            .zip(&self.target)
            .position(|(a, b)| a != b)
            .unwrap_or_else(|| program.len().min(self.target.len()));
        let bucket = if program.0 == self.target { self.max_len } else { mismatch.min(self.max_len - 1) };
        level * (self.max_len + 1) + bucket
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_env() -> RepairEnv {
        RepairEnv::new(vec![0, 1, 2, 3], 4, StartState::Fixed { program: vec![0, 1, 1, 3] }).unwrap()
    }

    #[test]
    fn levels() {
        let levels: Vec<u8> = (0..7).map(distance_level).collect();
        assert_eq!(levels, vec![4, 3, 2, 1, 1, 0, 0]);
    }

    #[test]
    fn fixing_the_corruption_raises_reward() {
        let env = small_env();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let start = env.start(&mut rng);
        // "abbd" is one substitution from "abcd": PE level, reward 3.
        assert_eq!(env.distance(&start), 1);
        assert_eq!(env.reward(&start), 3.0);
        let fixed = env.apply(&start, EditAction::Substitute { pos: 2, sym: 2 });
        assert_eq!(fixed.0, env.target());
        assert_eq!(env.reward(&fixed), 4.0);
        // A wrong edit lands at distance 2: WA level with half the symbols matched.
        let worse = env.apply(&start, EditAction::Substitute { pos: 0, sym: 3 });
        assert_eq!(env.distance(&worse), 2);
        assert_eq!(env.reward(&worse), 2.0 + 0.5 * 0.5);
    }

    #[test]
    fn action_indices_round_trip_layout() {
        let env = small_env();
        assert_eq!(env.num_actions(), 2 * 6 * 4 + 6 + 1);
        assert_eq!(env.action(0), EditAction::Substitute { pos: 0, sym: 0 });
        assert_eq!(env.action(24), EditAction::Insert { pos: 0, sym: 0 });
        assert_eq!(env.action(48), EditAction::Delete { pos: 0 });
        assert_eq!(env.action(54), EditAction::Stop);
    }

    #[test]
    fn mask_respects_bounds() {
        let env = small_env();
        let p = ToyProgram(vec![0, 1, 1, 3]);
        let mask = env.valid_mask(&p);
        for (i, ok) in mask.iter().enumerate() {
            let valid = match env.action(i) {
                EditAction::Substitute { pos, sym } => pos < 4 && p.0[pos] != sym,
                EditAction::Insert { pos, .. } => pos <= 4,
                EditAction::Delete { pos } => pos < 4,
                EditAction::Stop => true,
            };
            assert_eq!(*ok, valid, "action {i}");
        }
        let full = ToyProgram(vec![0; 6]);
        assert!(!env.is_valid(&full, EditAction::Insert { pos: 0, sym: 1 }));
        assert!(!env.is_valid(&ToyProgram(vec![1]), EditAction::Delete { pos: 0 }));
    }

    #[test]
    fn states_are_in_range() {
        let env = RepairEnv::one_corruption();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let p = env.start(&mut rng);
            assert_eq!(env.distance(&p), 1);
            assert!(env.state_of(&p) < env.num_states());
        }
        let solved = ToyProgram(env.target().to_vec());
        assert_eq!(env.state_of(&solved), 4 * (env.max_len() + 1) + env.max_len());
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(RepairEnv::new(vec![], 4, StartState::RandomSubstitutions { count: 0 }).is_err());
        assert!(RepairEnv::new(vec![5], 4, StartState::RandomSubstitutions { count: 0 }).is_err());
        assert!(RepairEnv::new(vec![0], 40, StartState::RandomSubstitutions { count: 0 }).is_err());
        assert!(RepairEnv::new(vec![0, 1], 4, StartState::RandomSubstitutions { count: 3 }).is_err());
    }
}
