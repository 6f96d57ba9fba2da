use serde::{Deserialize, Serialize};

/// Levenshtein distance over Unicode scalar values with unit costs.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainDistances {
    /// First refinement: v0 -> v1.
    pub d01: usize,
    /// Second refinement: v1 -> v2.
    pub d12: usize,
    /// Direct repair: v0 -> v2.
    pub d02: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDistanceSummary {
    pub per_record: Vec<ChainDistances>,
    pub skipped: usize,
    pub mean_d01: f64,
    pub mean_d12: f64,
    pub mean_d02: f64,
}

/// Pairwise distances between the three versions of each two-step repair.
/// Chains with any other number of versions are skipped and counted.
pub fn chain_distance_analysis<S: AsRef<str>>(chains: &[Vec<S>]) -> ChainDistanceSummary {
    let mut per_record = Vec::new();
    let mut skipped = 0;
    for chain in chains {
        let [v0, v1, v2] = chain.as_slice() else {
            skipped += 1;
            continue;
        };
        let (v0, v1, v2) = (v0.as_ref(), v1.as_ref(), v2.as_ref());
        per_record.push(ChainDistances {
            d01: edit_distance(v0, v1),
            d12: edit_distance(v1, v2),
            d02: edit_distance(v0, v2),
        });
    }
    let mean = |f: fn(&ChainDistances) -> usize| {
        if per_record.is_empty() {
            0.0
        } else {
            per_record.iter().map(f).sum::<usize>() as f64 / per_record.len() as f64
        }
    };
    ChainDistanceSummary {
        mean_d01: mean(|d| d.d01),
        mean_d12: mean(|d| d.d12),
        mean_d02: mean(|d| d.d02),
        per_record,
        skipped,
    }
}
