use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{pass_at_k, DifficultyTier, EvalError};

pub const REPORTED_KS: [u64; 3] = [1, 3, 5];

/// Samples drawn for one problem and how many were correct.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub problem_id: String,
    pub n: u64,
    pub c: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemRow {
    pub problem_id: String,
    pub tier: DifficultyTier,
    pub n: u64,
    pub c: u64,
    pub pass_at: Vec<f64>,
}

/// Mean pass@k over the problems of one tier (or all of them).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierRow {
    pub label: String,
    pub problems: usize,
    /// `None` when the tier has no problems.
    pub pass_at: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassAtKReport {
    pub ks: Vec<u64>,
    pub problems: Vec<ProblemRow>,
    /// Easy, Medium, Hard, All.
    pub tiers: Vec<TierRow>,
}

impl PassAtKReport {
    pub fn build(
        samples: &[SampleBatch],
        tiers: &BTreeMap<String, DifficultyTier>,
        ks: &[u64],
    ) -> Result<Self, EvalError> {
        let mut problems = Vec::with_capacity(samples.len());
        for s in samples {
            let tier = *tiers
                .get(&s.problem_id)
                .ok_or_else(|| EvalError::Argument(format!("no difficulty tier for `{}`", s.problem_id)))?;
            let pass_at = ks.iter().map(|&k| pass_at_k(s.n, s.c, k)).collect::<Result<_, _>>()?;
            problems.push(ProblemRow {
                problem_id: s.problem_id.clone(),
                tier,
                n: s.n,
                c: s.c,
                pass_at,
            });
        }

        let aggregate = |label: &str, rows: Vec<&ProblemRow>| TierRow {
            label: label.to_string(),
            problems: rows.len(),
            pass_at: (0..ks.len())
                .map(|j| {
                    (!rows.is_empty()).then(|| rows.iter().map(|r| r.pass_at[j]).sum::<f64>() / rows.len() as f64)
                })
                .collect(),
        };
        let mut tier_rows: Vec<TierRow> = DifficultyTier::ALL
            .iter()
            .map(|&t| aggregate(t.label(), problems.iter().filter(|r| r.tier == t).collect()))
            .collect();
        tier_rows.push(aggregate("All", problems.iter().collect()));

        Ok(Self {
            ks: ks.to_vec(),
            problems,
            tiers: tier_rows,
        })
    }

    pub fn tier(&self, label: &str) -> Option<&TierRow> {
        self.tiers.iter().find(|t| t.label == label)
    }

    /// Per-problem rows followed by one aggregate row per tier, whose
    /// problem_id is `*`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("problem_id,tier,n,c");
        for k in &self.ks {
            let _ = write!(out, ",pass@{k}");
        }
        out.push('\n');
        for row in &self.problems {
            let _ = write!(out, "{},{},{},{}", row.problem_id, row.tier, row.n, row.c);
            for v in &row.pass_at {
                let _ = write!(out, ",{v:.6}");
            }
            out.push('\n');
        }
        for tier in &self.tiers {
            let rows: Vec<&ProblemRow> = self
                .problems
                .iter()
                .filter(|r| tier.label == "All" || r.tier.label() == tier.label)
                .collect();
            let n: u64 = rows.iter().map(|r| r.n).sum();
            let c: u64 = rows.iter().map(|r| r.c).sum();
            let _ = write!(out, "*,{},{n},{c}", tier.label);
            for v in &tier.pass_at {
                match v {
                    Some(v) => {
                        let _ = write!(out, ",{v:.6}");
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Aligned text table with one row per tier, values in percent.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<8} {:>8}", "tier", "problems");
        for k in &self.ks {
            let _ = write!(out, " {:>8}", format!("pass@{k}"));
        }
        out.push('\n');
        for tier in &self.tiers {
            let _ = write!(out, "{:<8} {:>8}", tier.label, tier.problems);
            for v in &tier.pass_at {
                match v {
                    Some(v) => {
                        let _ = write!(out, " {:>8.2}", v * 100.0);
                    }
                    None => {
                        let _ = write!(out, " {:>8}", "-");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiers() -> BTreeMap<String, DifficultyTier> {
        [
            ("a", DifficultyTier::Easy),
            ("b", DifficultyTier::Medium),
            ("c", DifficultyTier::Hard),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    #[test]
    fn all_correct_gives_ones() {
        let samples: Vec<_> = ["a", "b", "c"]
            .iter()
            .map(|p| SampleBatch {
                problem_id: p.to_string(),
                n: 5,
                c: 5,
            })
            .collect();
        let report = PassAtKReport::build(&samples, &tiers(), &REPORTED_KS).unwrap();
        for t in &report.tiers {
            assert!(t.pass_at.iter().all(|v| *v == Some(1.0)));
        }
        assert_eq!(report.tiers.iter().map(|t| t.label.as_str()).collect::<Vec<_>>(), ["Easy", "Medium", "Hard", "All"]);
    }

    #[test]
    fn single_success_gives_one_fifth() {
        let samples = vec![SampleBatch {
            problem_id: "a".into(),
            n: 5,
            c: 1,
        }];
        let report = PassAtKReport::build(&samples, &tiers(), &REPORTED_KS).unwrap();
        assert_eq!(report.problems[0].pass_at[0], 0.2);
        assert_eq!(report.problems[0].pass_at[1], 0.6);
        assert_eq!(report.problems[0].pass_at[2], 1.0);
        assert_eq!(report.tier("Hard").unwrap().pass_at[0], None);
        let csv = report.to_csv();
        assert!(csv.starts_with("problem_id,tier,n,c,pass@1,pass@3,pass@5\na,Easy,5,1,0.200000,0.600000,1.000000\n"));
        assert!(csv.contains("*,Hard,0,0,,,\n"));
        let table = report.to_table();
        assert!(table.lines().nth(1).unwrap().starts_with("Easy"));
        assert!(table.contains("20.00"));
    }

    #[test]
    fn unknown_problem_is_an_error() {
        let samples = vec![SampleBatch {
            problem_id: "zzz".into(),
            n: 5,
            c: 1,
        }];
        assert!(PassAtKReport::build(&samples, &tiers(), &REPORTED_KS).is_err());
    }
}
