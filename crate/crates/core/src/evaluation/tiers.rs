use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DifficultyTier {
    Easy,
    Medium,
    Hard,
}

impl DifficultyTier {
    pub const ALL: [DifficultyTier; 3] = [DifficultyTier::Easy, DifficultyTier::Medium, DifficultyTier::Hard];

    pub fn label(self) -> &'static str {
        match self {
            DifficultyTier::Easy => "Easy",
            DifficultyTier::Medium => "Medium",
            DifficultyTier::Hard => "Hard",
        }
    }
}

impl fmt::Display for DifficultyTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Split problems into tertiles of historical pass rate.
///
/// Problems are sorted by ascending pass rate, ties broken by id; the
/// lowest third is hard and the highest easy. When the count is not a
/// multiple of three the first extra problem goes to hard and the second to
/// medium.
pub fn stratify(problems: &[(String, f64)]) -> Result<BTreeMap<String, DifficultyTier>, EvalError> {
    if problems.is_empty() {
        return Err(EvalError::Argument("no problems to stratify".into()));
    }
    if let Some((id, rate)) = problems.iter().find(|(_, r)| !(0.0..=1.0).contains(r)) {
        return Err(EvalError::Argument(format!("pass rate {rate} of `{id}` outside [0, 1]")));
    }
    let mut sorted: Vec<&(String, f64)> = problems.iter().collect();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));

    let n = sorted.len();
    let hard = n / 3 + usize::from(n % 3 >= 1);
    let medium = n / 3 + usize::from(n % 3 >= 2);
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, (id, _))| {
            let tier = if i < hard {
                DifficultyTier::Hard
            } else if i < hard + medium {
                DifficultyTier::Medium
            } else {
                DifficultyTier::Easy
            };
            (id.clone(), tier)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problems(rates: &[f64]) -> Vec<(String, f64)> {
        rates.iter().enumerate().map(|(i, &r)| (format!("p{i}"), r)).collect()
    }

    fn sizes(map: &BTreeMap<String, DifficultyTier>) -> [usize; 3] {
        DifficultyTier::ALL.map(|t| map.values().filter(|&&v| v == t).count())
    }

    #[test]
    fn sort_and_split() {
        let map = stratify(&problems(&[0.4, 0.1, 0.6, 0.3, 0.5, 0.2])).unwrap();
        assert_eq!(map["p1"], DifficultyTier::Hard);
        assert_eq!(map["p5"], DifficultyTier::Hard);
        assert_eq!(map["p3"], DifficultyTier::Medium);
        assert_eq!(map["p0"], DifficultyTier::Medium);
        assert_eq!(map["p4"], DifficultyTier::Easy);
        assert_eq!(map["p2"], DifficultyTier::Easy);
    }

    #[test]
    fn equal_rates_fall_back_to_id_order() {
        let map = stratify(&problems(&[0.5; 6])).unwrap();
        assert_eq!(sizes(&map), [2, 2, 2]);
        assert_eq!(map["p0"], DifficultyTier::Hard);
        assert_eq!(map["p1"], DifficultyTier::Hard);
        assert_eq!(map["p5"], DifficultyTier::Easy);
    }

    #[test]
    fn remainders() {
        // easy, medium, hard
        assert_eq!(sizes(&stratify(&problems(&[0.5; 7])).unwrap()), [2, 2, 3]);
        assert_eq!(sizes(&stratify(&problems(&[0.5; 8])).unwrap()), [2, 3, 3]);
        assert_eq!(sizes(&stratify(&problems(&[0.5; 1])).unwrap()), [0, 0, 1]);
        for n in 1..40 {
            let s = sizes(&stratify(&problems(&vec![0.3; n])).unwrap());
            assert!(s.iter().max().unwrap() - s.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn errors() {
        assert!(stratify(&[]).is_err());
        assert!(stratify(&problems(&[0.1, 1.2])).is_err());
    }
}
