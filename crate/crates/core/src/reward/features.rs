//! Hashed text features for the linear critic.

use serde::{Deserialize, Serialize};

pub const DEFAULT_HASH_DIM: usize = 4096;

/// Length, parse flag, loop count, recursion count.
pub const EXTRA_FEATURES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub hash_dim: usize,
    /// Token n-grams of length 1..=max_ngram are hashed.
    pub max_ngram: usize,
    /// Prepend the problem context to the program text before featurizing.
    pub use_context: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            hash_dim: DEFAULT_HASH_DIM,
            max_ngram: 2,
            use_context: false,
        }
    }
}

impl FeatureConfig {
    pub fn dim(&self) -> usize {
        self.hash_dim + EXTRA_FEATURES
    }
}

/// Feature vector stored as sorted `(index, value)` pairs; absent indices are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    dim: usize,
    entries: Vec<(usize, f64)>,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for &(i, x) in &self.entries {
            v[i] = x;
        }
        v
    }

    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, x)| weights[i] * x).sum()
    }
}

pub fn featurize(cfg: &FeatureConfig, program: &str) -> FeatureVector {
    let tokens = tokenize(program);
    let mut counts = std::collections::BTreeMap::<usize, f64>::new();
    for n in 1..=cfg.max_ngram.max(1) {
        for gram in tokens.windows(n) {
            let bucket = (hash_tokens(gram) % cfg.hash_dim as u64) as usize;
            *counts.entry(bucket).or_default() += 1.0;
        }
    }
    let mut entries: Vec<(usize, f64)> = counts.into_iter().map(|(i, c)| (i, c.ln_1p())).collect();

    let base = cfg.hash_dim;
    let extras = [
        (program.chars().count() as f64).ln_1p(),
        if brackets_balanced(program) { 1.0 } else { 0.0 },
        (tokens.iter().filter(|t| matches!(**t, "for" | "while")).count() as f64).ln_1p(),
        (recursive_functions(&tokens) as f64).ln_1p(),
    ];
    entries.extend(extras.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(k, &v)| (base + k, v)));
    FeatureVector { dim: cfg.dim(), entries }
}

/// Featurize with optional problem context, honouring `cfg.use_context`.
pub fn featurize_in_context(cfg: &FeatureConfig, context: Option<&str>, program: &str) -> FeatureVector {
    match context {
        Some(ctx) if cfg.use_context => featurize(cfg, &format!("{ctx}\n{program}")),
        _ => featurize(cfg, program),
    }
}

/// Identifier/number runs become one token, any other non-space character
/// is a token of its own.
pub fn tokenize(text: &str) -> Vec<&str> {
    let mut tokens = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        let word = c.is_alphanumeric() || c == '_';
        match (word, start) {
            (true, None) => start = Some(i),
            (true, Some(_)) => {}
            (false, s) => {
                if let Some(s) = s {
                    tokens.push(&text[s..i]);
                    start = None;
                }
                if !c.is_whitespace() {
                    tokens.push(&text[i..i + c.len_utf8()]);
                }
            }
        }
    }
    if let Some(s) = start {
        tokens.push(&text[s..]);
    }
    tokens
}

// FNV-1a over the tokens, separated by 0x1f.
fn hash_tokens(tokens: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for (k, t) in tokens.iter().enumerate() {
        if k > 0 {
            h ^= 0x1f;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        for b in t.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

/// Bracket balance ignoring quoted text; a cheap stand-in for a parser.
fn brackets_balanced(text: &str) -> bool {
    let mut stack = Vec::new();
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for c in text.chars() {
        if let Some(q) = quote {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == q || c == '\n' {
                quote = None;
            }
            continue;
        }
        match c {
            '"' | '\'' => quote = Some(c),
            '(' | '[' | '{' => stack.push(c),
            ')' | ']' | '}' => {
                let open = match c {
                    ')' => '(',
                    ']' => '[',
                    _ => '{',
                };
                if stack.pop() != Some(open) {
                    return false;
                }
            }
            _ => {}
        }
    }
    stack.is_empty() && quote.is_none()
}

/// Functions introduced with `def name` whose name is called later on.
fn recursive_functions(tokens: &[&str]) -> usize {
    let mut count = 0;
    for (i, w) in tokens.windows(2).enumerate() {
        if w[0] == "def" {
            let name = w[1];
            let called = tokens[i + 2..].windows(2).any(|c| c[0] == name && c[1] == "(");
            if called {
                count += 1;
            }
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_splits_words_and_symbols() {
        assert_eq!(tokenize("x = foo(a_1)+2"), vec!["x", "=", "foo", "(", "a_1", ")", "+", "2"]);
        assert!(tokenize("   ").is_empty());
    }

    #[test]
    fn features_have_fixed_dimension_and_are_finite() {
        let cfg = FeatureConfig {
            hash_dim: 64,
            ..Default::default()
        };
        for src in ["", "print(1)", "def f(n):\n    return f(n - 1)\n", "for i in range(3): print(i"] {
            let f = featurize(&cfg, src);
            assert_eq!(f.dim(), 68);
            assert_eq!(f.to_dense().len(), 68);
            assert!(f.entries().iter().all(|(i, v)| *i < 68 && v.is_finite()));
        }
    }

    #[test]
    fn structural_indicators() {
        let cfg = FeatureConfig::default();
        let d = featurize(&cfg, "def f(n):\n    for i in x: f(i)\n").to_dense();
        let base = cfg.hash_dim;
        assert_eq!(d[base + 1], 1.0);
        assert!(d[base + 2] > 0.0);
        assert!(d[base + 3] > 0.0);
        let broken = featurize(&cfg, "print((1)").to_dense();
        assert_eq!(broken[base + 1], 0.0);
        assert!(brackets_balanced("s = ')'"));
    }

    #[test]
    fn context_flag_controls_concatenation() {
        let mut cfg = FeatureConfig::default();
        let plain = featurize(&cfg, "print(1)");
        assert_eq!(featurize_in_context(&cfg, Some("sum two numbers"), "print(1)"), plain);
        cfg.use_context = true;
        assert_ne!(featurize_in_context(&cfg, Some("sum two numbers"), "print(1)"), plain);
    }
}
