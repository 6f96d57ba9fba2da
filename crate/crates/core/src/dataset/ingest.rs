//! Loading raw submissions and problem folders from disk.
//!
//! A problem folder holds `problem.toml`, a description (`description.txt`,
//! or `description.html` passed through a [`TextExtractor`]) and a `tests/`
//! directory of `NAME.in` / `NAME.out` pairs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use regex::Regex;
use serde::Deserialize;

use super::{DatasetError, ProblemMeta, RawSubmission};
use crate::sandbox::TestCase;
use crate::status::Status;

/// Turns a problem's HTML statement into plain text.
pub trait TextExtractor {
    fn extract(&self, html: &str) -> String;
}

/// Drops tags, scripts and styles, decodes a few entities and collapses
/// whitespace.
#[derive(Debug, Default, Clone, Copy)]
pub struct StripTags;

impl TextExtractor for StripTags {
    fn extract(&self, html: &str) -> String {
        let blocks = Regex::new(r"(?is)<(script|style)\b.*?</(script|style)\s*>").expect("valid regex");
        let tags = Regex::new(r"(?s)<[^>]*>").expect("valid regex");
        let text = blocks.replace_all(html, " ");
        let text = tags.replace_all(&text, " ");
        let text = text
            .replace("&lt;", "<")
            .replace("&gt;", ">")
            .replace("&quot;", "\"")
            .replace("&#39;", "'")
            .replace("&nbsp;", " ")
            .replace("&amp;", "&");
        text.split_whitespace().collect::<Vec<_>>().join(" ")
    }
}

#[derive(Deserialize)]
struct ProblemFile {
    time_limit_ms: u64,
    memory_mb: u64,
    #[serde(default)]
    historical_pass_rate: f64,
    #[serde(default)]
    description: Option<String>,
}

pub fn load_problem(dir: &Path, extractor: &dyn TextExtractor) -> Result<ProblemMeta, DatasetError> {
    let problem_id = dir
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| DatasetError::Format(format!("bad problem folder `{}`", dir.display())))?
        .to_string();
    let meta_path = dir.join("problem.toml");
    let meta: ProblemFile = toml::from_str(&fs::read_to_string(&meta_path)?)
        .map_err(|e| DatasetError::Format(format!("{}: {e}", meta_path.display())))?;
    if meta.time_limit_ms == 0 || meta.memory_mb == 0 {
        return Err(DatasetError::Format(format!("{problem_id}: limits must be positive")));
    }
    if !(0.0..=1.0).contains(&meta.historical_pass_rate) {
        return Err(DatasetError::Format(format!("{problem_id}: pass rate outside [0, 1]")));
    }

    let description = if let Some(d) = meta.description {
        d
    } else if dir.join("description.txt").exists() {
        fs::read_to_string(dir.join("description.txt"))?
    } else if dir.join("description.html").exists() {
        extractor.extract(&fs::read_to_string(dir.join("description.html"))?)
    } else {
        String::new()
    };
    let description = description.trim().to_string();
    if description.is_empty() {
        return Err(DatasetError::Format(format!("{problem_id}: empty description")));
    }

    let mut tests = Vec::new();
    let tests_dir = dir.join("tests");
    if tests_dir.is_dir() {
        let mut names: Vec<String> = fs::read_dir(&tests_dir)?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix(".in")).map(str::to_string))
            .collect();
        names.sort();
        for name in names {
            let expected = tests_dir.join(format!("{name}.out"));
            if !expected.exists() {
                return Err(DatasetError::Format(format!("{problem_id}: test `{name}` has no .out file")));
            }
            tests.push(TestCase::new(
                name.clone(),
                fs::read(tests_dir.join(format!("{name}.in")))?,
                fs::read(expected)?,
            ));
        }
    }
    Ok(ProblemMeta {
        problem_id,
        description,
        time_limit_ms: meta.time_limit_ms,
        memory_bytes: meta.memory_mb << 20,
        tests,
        historical_pass_rate: meta.historical_pass_rate,
    })
}

/// Every subfolder of `root` with a `problem.toml`, keyed by folder name.
pub fn load_problems(root: &Path, extractor: &dyn TextExtractor) -> Result<BTreeMap<String, ProblemMeta>, DatasetError> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(root)? {
        let path = entry?.path();
        if path.join("problem.toml").is_file() {
            let p = load_problem(&path, extractor)?;
            out.insert(p.problem_id.clone(), p);
        }
    }
    Ok(out)
}

#[derive(Deserialize)]
struct MetadataRow {
    submission_id: String,
    user_id: String,
    problem_id: String,
    timestamp: i64,
    #[serde(default)]
    claimed_status: String,
    path: String,
}

/// Read the metadata CSV (`submission_id,user_id,problem_id,timestamp,
/// claimed_status,path`) and each source file, relative to `source_root`.
pub fn load_submissions(metadata_csv: &Path, source_root: &Path) -> Result<Vec<RawSubmission>, DatasetError> {
    let mut reader = csv::Reader::from_path(metadata_csv)?;
    let mut out = Vec::new();
    for row in reader.deserialize() {
        let row: MetadataRow = row?;
        let claimed_status = match row.claimed_status.trim() {
            "" => None,
            s => Some(
                s.parse::<Status>()
                    .map_err(|e| DatasetError::Format(format!("submission {}: {e}", row.submission_id)))?,
            ),
        };
        let bytes = fs::read(source_root.join(&row.path))?;
        out.push(RawSubmission {
            submission_id: row.submission_id,
            user_id: row.user_id,
            problem_id: row.problem_id,
            timestamp: row.timestamp,
            source: String::from_utf8_lossy(&bytes).into_owned(),
            claimed_status,
        });
    }
    Ok(out)
}
