use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DatasetError, RepairRecord};

/// Train/test problem partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemSplit {
    pub train: BTreeSet<String>,
    pub test: BTreeSet<String>,
}

impl ProblemSplit {
    /// Problems that appear on both sides.
    pub fn overlap(&self) -> Vec<&String> {
        self.train.intersection(&self.test).collect()
    }
}

/// Number of test problems for a `train_parts : test_parts` split, rounded
/// down so the training side gets any remainder.
pub fn test_count(problems: usize, train_parts: usize, test_parts: usize) -> usize {
    problems * test_parts / (train_parts + test_parts)
}

/// Seeded random partition of the distinct problem ids, 9:1 by default.
pub fn split_problems<'a>(
    problem_ids: impl IntoIterator<Item = &'a str>,
    train_parts: usize,
    test_parts: usize,
    seed: u64,
) -> Result<ProblemSplit, DatasetError> {
    if train_parts + test_parts == 0 {
        return Err(DatasetError::Config("split ratio has no parts".into()));
    }
    let mut ids: Vec<String> = problem_ids
        .into_iter()
        .map(str::to_string)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = test_count(ids.len(), train_parts, test_parts);
    let test = ids.drain(..n_test).collect();
    Ok(ProblemSplit {
        train: ids.into_iter().collect(),
        test,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportSummary {
    pub train_records: usize,
    pub test_records: usize,
    pub files: Vec<PathBuf>,
}

/// Write `train.jsonl`, `test.jsonl` and the two problem manifests. Refuses
/// to write anything if a problem is in both splits, a record's problem is in
/// neither, or a record does not end in its only AC.
pub fn export_records(records: &[RepairRecord], split: &ProblemSplit, dir: &Path) -> Result<ExportSummary, DatasetError> {
    let overlap = split.overlap();
    if !overlap.is_empty() {
        return Err(DatasetError::Leakage(overlap.into_iter().cloned().collect()));
    }
    let mut by_side: BTreeMap<&str, Vec<&RepairRecord>> = BTreeMap::new();
    for r in records {
        if !r.is_valid() {
            return Err(DatasetError::InvalidRecord(format!(
                "record of user `{}` on `{}` does not end in its first AC",
                r.user_id, r.problem_id
            )));
        }
        let side = if split.train.contains(&r.problem_id) {
            "train"
        } else if split.test.contains(&r.problem_id) {
            "test"
        } else {
            return Err(DatasetError::InvalidRecord(format!("problem `{}` is in neither split", r.problem_id)));
        };
        by_side.entry(side).or_default().push(r);
    }

    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for side in ["train", "test"] {
        let path = dir.join(format!("{side}.jsonl"));
        let mut w = BufWriter::new(File::create(&path)?);
        for r in by_side.get(side).into_iter().flatten() {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        files.push(path);

        let path = dir.join(format!("{side}_problems.txt"));
        let ids = if side == "train" { &split.train } else { &split.test };
        let mut w = BufWriter::new(File::create(&path)?);
        for id in ids {
            writeln!(w, "{id}")?;
        }
        w.flush()?;
        files.push(path);
    }
    Ok(ExportSummary {
        train_records: by_side.get("train").map_or(0, Vec::len),
        test_records: by_side.get("test").map_or(0, Vec::len),
        files,
    })
}

pub fn read_records(path: &Path) -> Result<Vec<RepairRecord>, DatasetError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| DatasetError::Format(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

pub fn read_manifest(path: &Path) -> Result<BTreeSet<String>, DatasetError> {
    Ok(fs::read_to_string(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::RecordVersion;
    use crate::status::Status;

    fn record(problem: &str, user: &str) -> RepairRecord {
        RepairRecord {
            user_id: user.into(),
            problem_id: problem.into(),
            time_limit_ms: 2000,
            memory_bytes: 256 << 20,
            versions: vec![
                RecordVersion {
                    submission_id: "a".into(),
                    source: "print(1)\n".into(),
                    status: Status::WrongAnswer,
                },
                RecordVersion {
                    submission_id: "b".into(),
                    source: "print('é')\n".into(),
                    status: Status::Accepted,
                },
            ],
        }
    }

    #[test]
    fn split_sizes() {
        assert_eq!(test_count(100, 9, 1), 10);
        assert_eq!(test_count(624, 9, 1), 62);
        let ids: Vec<String> = (0..100).map(|i| format!("p{i:03}")).collect();
        let split = split_problems(ids.iter().map(String::as_str), 9, 1, 7).unwrap();
        assert_eq!((split.train.len(), split.test.len()), (90, 10));
        assert!(split.overlap().is_empty());
        let again = split_problems(ids.iter().map(String::as_str), 9, 1, 7).unwrap();
        assert_eq!(split, again);
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let records = vec![record("p1", "u1"), record("p2", "u1"), record("p1", "u2")];
        let split = ProblemSplit {
            train: ["p1".to_string()].into(),
            test: ["p2".to_string()].into(),
        };
        let summary = export_records(&records, &split, dir.path()).unwrap();
        assert_eq!((summary.train_records, summary.test_records), (2, 1));
        let train = read_records(&dir.path().join("train.jsonl")).unwrap();
        assert_eq!(train, vec![records[0].clone(), records[2].clone()]);
        assert_eq!(read_manifest(&dir.path().join("test_problems.txt")).unwrap(), split.test);
    }

    #[test]
    fn leakage_aborts_before_writing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let split = ProblemSplit {
            train: ["p1".to_string(), "p2".to_string()].into(),
            test: ["p2".to_string()].into(),
        };
        match export_records(&[record("p1", "u")], &split, &out) {
            Err(DatasetError::Leakage(ids)) => assert_eq!(ids, vec!["p2".to_string()]),
            other => panic!("expected leakage error, got {other:?}"),
        }
        assert!(!out.exists());
    }

    #[test]
    fn invalid_records_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut bad = record("p1", "u");
        bad.versions.pop();
        let split = ProblemSplit {
            train: ["p1".to_string()].into(),
            test: BTreeSet::new(),
        };
        assert!(matches!(
            export_records(&[bad], &split, dir.path()),
            Err(DatasetError::InvalidRecord(_))
        ));
        assert!(matches!(
            export_records(&[record("p9", "u")], &split, dir.path()),
            Err(DatasetError::InvalidRecord(_))
        ));
    }
}
