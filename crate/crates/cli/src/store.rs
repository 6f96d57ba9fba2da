//! Append-only trajectory logs.
//!
//! Layout: `<root>/<run>/<problem>/<sample>.json`, one file per trajectory,
//! created with `create_new` so a written record is never replaced.
//! Concurrent writers never share a file; the index is rebuilt from the
//! directory tree, so it always agrees with what is on disk.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use stepfix::repair_loop::Trajectory;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub run_id: String,
    pub problem_id: String,
    pub sample_index: usize,
    pub initial_program: String,
    /// Present when the loop ran; absent when it could not start.
    pub trajectory: Option<Trajectory>,
    pub error: Option<String>,
}

impl TrajectoryLog {
    /// The program the loop handed back, or the initial one if it failed.
    pub fn returned_program(&self) -> &str {
        self.trajectory
            .as_ref()
            .map_or(&self.initial_program, |t| &t.returned().program)
    }
}

#[derive(Debug, Clone)]
pub struct TrajectoryStore {
    root: PathBuf,
}

impl TrajectoryStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn run_dir(&self, run_id: &str) -> PathBuf {
        self.root.join(run_id)
    }

    fn path(&self, run_id: &str, problem_id: &str, sample: usize) -> PathBuf {
        self.run_dir(run_id).join(problem_id).join(format!("{sample}.json"))
    }

    /// Write one log. Fails if that (run, problem, sample) already exists.
    pub fn append(&self, log: &TrajectoryLog) -> Result<PathBuf, CliError> {
        for id in [&log.run_id, &log.problem_id] {
            check_component(id)?;
        }
        let path = self.path(&log.run_id, &log.problem_id, log.sample_index);
        fs::create_dir_all(path.parent().expect("has parent"))?;
        let mut file = OpenOptions::new().write(true).create_new(true).open(&path).map_err(|e| {
            if e.kind() == io::ErrorKind::AlreadyExists {
                CliError::Store(format!("{} already exists", path.display()))
            } else {
                e.into()
            }
        })?;
        let mut text = serde_json::to_string_pretty(log)?;
        text.push('\n');
        file.write_all(text.as_bytes())?;
        file.sync_all()?;
        Ok(path)
    }

    /// (problem, sample) to file, for every log of `run_id`.
    pub fn index(&self, run_id: &str) -> Result<BTreeMap<(String, usize), PathBuf>, CliError> {
        check_component(run_id)?;
        let dir = self.run_dir(run_id);
        if !dir.is_dir() {
            return Err(CliError::Store(format!("no run `{run_id}` under {}", self.root.display())));
        }
        let mut index = BTreeMap::new();
        for problem in fs::read_dir(&dir)? {
            let problem = problem?;
            if !problem.file_type()?.is_dir() {
                continue;
            }
            let problem_id = problem.file_name().to_string_lossy().into_owned();
            for entry in fs::read_dir(problem.path())? {
                let path = entry?.path();
                let sample = path
                    .file_name()
                    .and_then(|n| n.to_str())
                    .and_then(|n| n.strip_suffix(".json"))
                    .and_then(|n| n.parse::<usize>().ok());
                if let Some(sample) = sample {
                    index.insert((problem_id.clone(), sample), path);
                }
            }
        }
        Ok(index)
    }

    /// Every log of a run in index order. A file whose content disagrees
    /// with its location is an error.
    pub fn load_run(&self, run_id: &str) -> Result<Vec<TrajectoryLog>, CliError> {
        let mut out = Vec::new();
        for ((problem_id, sample), path) in self.index(run_id)? {
            let log: TrajectoryLog = serde_json::from_str(&fs::read_to_string(&path)?)?;
            if log.run_id != run_id || log.problem_id != problem_id || log.sample_index != sample {
                return Err(CliError::Store(format!("{} does not match its location", path.display())));
            }
            out.push(log);
        }
        Ok(out)
    }

    pub fn write_file(&self, run_id: &str, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let path = self.run_dir(run_id).join(name);
        fs::create_dir_all(self.run_dir(run_id))?;
        fs::write(&path, text)?;
        Ok(path)
    }
}

fn check_component(id: &str) -> Result<(), CliError> {
    let ok = !id.is_empty()
        && id != "."
        && id != ".."
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(CliError::Store(format!("`{id}` is not a valid run or problem id")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log(problem: &str, sample: usize) -> TrajectoryLog {
        TrajectoryLog {
            run_id: "r1".into(),
            problem_id: problem.into(),
            sample_index: sample,
            initial_program: "print(1)\n".into(),
            trajectory: None,
            error: Some("x".into()),
        }
    }

    #[test]
    fn append_index_load() {
        let dir = tempfile::tempdir().unwrap();
        let store = TrajectoryStore::new(dir.path());
        for (p, s) in [("b", 0), ("a", 1), ("a", 0)] {
            store.append(&log(p, s)).unwrap();
        }
        let keys: Vec<_> = store.index("r1").unwrap().into_keys().collect();
        assert_eq!(keys, [("a".to_string(), 0), ("a".to_string(), 1), ("b".to_string(), 0)]);
        let logs = store.load_run("r1").unwrap();
        assert_eq!(logs[2], log("b", 0));
        assert_eq!(logs[0].returned_program(), "print(1)\n");
    }

    #[test]
    fn records_are_immutable() {
        let dir = tempfile::tempdir().unwrap();
        let store = TrajectoryStore::new(dir.path());
        store.append(&log("a", 0)).unwrap();
        let mut other = log("a", 0);
        other.initial_program = "changed".into();
        assert!(matches!(store.append(&other), Err(CliError::Store(_))));
        assert_eq!(store.load_run("r1").unwrap()[0], log("a", 0));
    }

    #[test]
    fn misplaced_file_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let store = TrajectoryStore::new(dir.path());
        let path = store.append(&log("a", 0)).unwrap();
        fs::rename(&path, path.with_file_name("5.json")).unwrap();
        assert!(matches!(store.load_run("r1"), Err(CliError::Store(_))));
    }

    #[test]
    fn ids_cannot_escape_the_root() {
        let dir = tempfile::tempdir().unwrap();
        let store = TrajectoryStore::new(dir.path());
        assert!(store.append(&log("../x", 0)).is_err());
        assert!(store.index("..").is_err());
    }
}
