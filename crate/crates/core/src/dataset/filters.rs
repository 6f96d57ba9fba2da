use std::collections::HashMap;
use std::path::Path;

use regex::Regex;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::{DatasetError, RawSubmission};

/// Hash of the source with every whitespace character removed.
pub fn normalized_hash(source: &str) -> String {
    let mut h = Sha256::new();
    let mut buf = [0u8; 4];
    for c in source.chars().filter(|c| !c.is_whitespace()) {
        h.update(c.encode_utf8(&mut buf).as_bytes());
    }
    hex::encode(h.finalize())
}

/// Keep only the earliest of each whitespace-insensitive duplicate within a
/// (user, problem) pair. Survivors keep their input order.
pub fn dedup_filter(submissions: Vec<RawSubmission>) -> (Vec<RawSubmission>, usize) {
    let mut earliest: HashMap<(&str, &str, String), usize> = HashMap::new();
    for (i, s) in submissions.iter().enumerate() {
        let key = (s.user_id.as_str(), s.problem_id.as_str(), normalized_hash(&s.source));
        earliest
            .entry(key)
            .and_modify(|j| {
                let cur = &submissions[*j];
                if (s.timestamp, &s.submission_id) < (cur.timestamp, &cur.submission_id) {
                    *j = i;
                }
            })
            .or_insert(i);
    }
    let mut keep = vec![false; submissions.len()];
    for i in earliest.into_values() {
        keep[i] = true;
    }
    let removed = keep.iter().filter(|k| !**k).count();
    let survivors = submissions.into_iter().zip(keep).filter_map(|(s, k)| k.then_some(s)).collect();
    (survivors, removed)
}

#[derive(Debug, Clone)]
pub struct MaliciousRule {
    pub id: String,
    pub description: String,
    pub pattern: Regex,
}

#[derive(Debug, Clone, Default)]
pub struct RuleSet {
    pub rules: Vec<MaliciousRule>,
}

#[derive(Deserialize)]
struct RuleFile {
    #[serde(default)]
    rule: Vec<RuleEntry>,
}

#[derive(Deserialize)]
struct RuleEntry {
    id: String,
    #[serde(default)]
    description: String,
    pattern: String,
}

const DEFAULT_RULES: &str = include_str!("../../data/malicious_rules.toml");

impl RuleSet {
    pub fn builtin() -> Self {
        Self::from_toml(DEFAULT_RULES).expect("built-in rules parse")
    }

    pub fn from_toml(text: &str) -> Result<Self, DatasetError> {
        let file: RuleFile = toml::from_str(text).map_err(|e| DatasetError::Config(e.to_string()))?;
        let rules = file
            .rule
            .into_iter()
            .map(|r| {
                let pattern =
                    Regex::new(&r.pattern).map_err(|e| DatasetError::Config(format!("rule `{}`: {e}", r.id)))?;
                Ok(MaliciousRule {
                    id: r.id,
                    description: r.description,
                    pattern,
                })
            })
            .collect::<Result<_, DatasetError>>()?;
        Ok(Self { rules })
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Id of the first rule the source hits.
    pub fn first_hit(&self, source: &str) -> Option<&str> {
        self.rules.iter().find(|r| r.pattern.is_match(source)).map(|r| r.id.as_str())
    }
}

/// A submission removed by a rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleHit {
    pub submission_id: String,
    pub rule_id: String,
}

pub fn malicious_filter(submissions: Vec<RawSubmission>, rules: &RuleSet) -> (Vec<RawSubmission>, Vec<RuleHit>) {
    let mut hits = Vec::new();
    let survivors = submissions
        .into_iter()
        .filter(|s| match rules.first_hit(&s.source) {
            Some(id) => {
                hits.push(RuleHit {
                    submission_id: s.submission_id.clone(),
                    rule_id: id.to_string(),
                });
                false
            }
            None => true,
        })
        .collect();
    (survivors, hits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sub(id: &str, user: &str, t: i64, src: &str) -> RawSubmission {
        RawSubmission {
            submission_id: id.into(),
            user_id: user.into(),
            problem_id: "p1".into(),
            timestamp: t,
            source: src.into(),
            claimed_status: None,
        }
    }

    #[test]
    fn identical_submissions_keep_the_earliest() {
        let (out, removed) = dedup_filter(vec![
            sub("s2", "u", 20, "print(1)\n"),
            sub("s1", "u", 10, "print(1)\n"),
            sub("s3", "u", 30, "print(2)\n"),
        ]);
        assert_eq!(removed, 1);
        let ids: Vec<_> = out.iter().map(|s| s.submission_id.as_str()).collect();
        assert_eq!(ids, ["s1", "s3"]);
    }

    #[test]
    fn trailing_whitespace_is_a_duplicate() {
        assert_eq!(normalized_hash("print(1)\n"), normalized_hash("print(1)   \r\n\n"));
        let (out, removed) = dedup_filter(vec![sub("a", "u", 1, "x = 1\n"), sub("b", "u", 2, "x = 1   \n\n")]);
        assert_eq!((out.len(), removed), (1, 1));
    }

    #[test]
    fn dedup_is_per_user() {
        let (out, removed) = dedup_filter(vec![sub("a", "u1", 1, "x"), sub("b", "u2", 1, "x")]);
        assert_eq!((out.len(), removed), (2, 0));
    }

    #[test]
    fn builtin_rules_catch_destructive_code() {
        let rules = RuleSet::builtin();
        let bad = [
            "import os\nos.system('rm -rf /')\n",
            "import subprocess\nsubprocess.run(['ls'])\n",
            "import shutil\nshutil.rmtree('/tmp/x')\n",
            "import os\nwhile True:\n    os.fork()\n",
            "import socket\ns = socket.socket()\n",
            "open('/etc/passwd').read()\n",
        ];
        for src in bad {
            assert!(rules.first_hit(src).is_some(), "{src}");
        }
        let benign = [
            "a, b = map(int, input().split())\nprint(a + b)\n",
            "import sys\ninput = sys.stdin.readline\nprint(eval(input()))\n",
            "import os\ndata = os.read(0, 1 << 20)\n",
        ];
        for src in benign {
            assert_eq!(rules.first_hit(src), None, "{src}");
        }
    }

    #[test]
    fn hits_are_logged_and_empty_rules_are_identity() {
        let subs = vec![sub("a", "u", 1, "import os\nos.system('rm x')"), sub("b", "u", 2, "print(1)")];
        let (out, hits) = malicious_filter(subs.clone(), &RuleSet::builtin());
        assert_eq!(out.len(), 1);
        assert_eq!(hits[0].submission_id, "a");
        assert_eq!(hits[0].rule_id, "shell-exec");
        let (out, hits) = malicious_filter(subs.clone(), &RuleSet::default());
        assert_eq!(out, subs);
        assert!(hits.is_empty());
    }

    #[test]
    fn bad_rule_file_is_rejected() {
        assert!(RuleSet::from_toml("[[rule]]\nid = \"x\"\npattern = \"(\"\n").is_err());
        assert!(RuleSet::from_toml("").unwrap().rules.is_empty());
    }
}
