//! Generated programs whose status is decided by a marker statement, for
//! checking that a ranker can recover the quality order from text alone.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ComparisonBatch, JudgedProgram};
use crate::status::Status;

const FILLER: &[&str] = &[
    "n = int(input())",
    "a = list(map(int, input().split()))",
    "total = 0",
    "for x in a:\n    total += x",
    "best = max(a)",
    "a.sort()",
    "m = len(a) // 2",
    "seen = set()",
    "res = []",
    "k = n % 7",
    "acc = sum(a[:k])",
    "import sys",
    "data = sys.stdin.read().split()",
    "cnt = {}",
    "for v in a:\n    cnt[v] = cnt.get(v, 0) + 1",
];

fn markers(status: Status) -> &'static [&'static str] {
    match status {
        Status::Accepted => &["print(answer)", "sys.stdout.write(str(answer) + '\\n')", "print(answer, flush=True)"],
        Status::PresentationError => &["print(answer, end='  ')", "print(' ', answer)", "print(answer, '\\n\\n')"],
        Status::WrongAnswer => &["print(answer + 1)", "print(answer - offset)", "print(len(a))"],
        Status::TimeLimitExceeded => &["while True:\n    pass", "for i in range(10 ** 12):\n    answer ^= i"],
        Status::MemoryLimitExceeded => &["big = [0] * (10 ** 11)", "grow = 'x' * (10 ** 12)"],
        Status::CompileError => &["print((answer)", "def solve(:\n    return", "if answer = 1:\n    print(answer)"],
        Status::RuntimeError => &["raise ValueError(answer)", "print(1 // 0)", "print(a[len(a) + 5])"],
    }
}

pub struct SyntheticCorpus {
    pub programs: Vec<JudgedProgram>,
}

impl SyntheticCorpus {
    /// `size` programs with statuses drawn uniformly from the seven tags.
    pub fn generate(size: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let programs = (0..size)
            .map(|_| {
                let status = *Status::ALL.choose(&mut rng).expect("non-empty");
                JudgedProgram::new(random_program(status, &mut rng), status)
            })
            .collect();
        Self { programs }
    }
}

fn random_program<R: Rng + ?Sized>(status: Status, rng: &mut R) -> String {
    let count = rng.random_range(2..6);
    let mut lines: Vec<&str> = FILLER.choose_multiple(rng, count).copied().collect();
    lines.push("answer = total + best");
    let marker = *markers(status).choose(rng).expect("non-empty");
    let at = rng.random_range(1..=lines.len());
    lines.insert(at, marker);
    let mut text = lines.join("\n");
    text.push('\n');
    text
}

/// Shuffle the programs and cut them into batches of `k`.
pub fn synthetic_batches(programs: &[JudgedProgram], k: usize, seed: u64) -> Vec<ComparisonBatch> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = programs.to_vec();
    shuffled.shuffle(&mut rng);
    shuffled
        .chunks(k.max(2))
        .filter(|c| c.len() >= 2)
        .enumerate()
        .map(|(i, chunk)| ComparisonBatch::new(format!("synthetic-{i}"), chunk.to_vec()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_seeded() {
        let a = SyntheticCorpus::generate(20, 4);
        let b = SyntheticCorpus::generate(20, 4);
        assert_eq!(a.programs, b.programs);
        assert!(a.programs.iter().all(|p| p.source.contains("answer")));
    }

    #[test]
    fn batches_cover_corpus() {
        let corpus = SyntheticCorpus::generate(100, 2);
        let batches = synthetic_batches(&corpus.programs, 9, 2);
        // 11 full batches; the single leftover program cannot be compared.
        assert_eq!(batches.len(), 11);
        assert_eq!(batches.iter().map(|b| b.programs.len()).sum::<usize>(), 99);
    }
}
