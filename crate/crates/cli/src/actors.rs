//! Actor backends: a remote chat endpoint, a scripted mock and a seeded
//! mutation baseline. Only the remote actor touches the network.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use stepfix::repair_loop::{Actor, ActorContext, ActorError};

use crate::config::{ActorBackend, HarnessConfig, MutationConfig, RemoteConfig, SamplingConfig};
use crate::extract::extract_program;
use crate::prompt::{PromptEnvelope, PromptTemplate};
use crate::CliError;

/// Build the configured actor. A remote actor whose token variable is unset
/// fails here, before any request is made.
pub fn build_actor(cfg: &HarnessConfig) -> Result<Box<dyn Actor>, CliError> {
    Ok(match &cfg.actor {
        ActorBackend::Remote(remote) => {
            let template = match &cfg.paths.prompt_template {
                Some(path) => PromptTemplate::load(path)?,
                None => PromptTemplate::default(),
            };
            Box::new(RemoteActor::from_env(remote, cfg.sampling, template)?)
        }
        ActorBackend::Mock { script } => Box::new(MockActor::load(script)?),
        ActorBackend::Mutation(m) => Box::new(MutationActor::new(m, cfg.seed)?),
    })
}

pub struct RemoteActor {
    endpoint: String,
    model: String,
    token: String,
    sampling: SamplingConfig,
    template: PromptTemplate,
    max_retries: u32,
    backoff: Duration,
    agent: ureq::Agent,
    requests: AtomicUsize,
    malformed: AtomicUsize,
}

impl RemoteActor {
    pub fn from_env(cfg: &RemoteConfig, sampling: SamplingConfig, template: PromptTemplate) -> Result<Self, CliError> {
        let token = std::env::var(&cfg.auth_env)
            .ok()
            .filter(|t| !t.is_empty())
            .ok_or_else(|| CliError::Config(format!("environment variable `{}` is not set", cfg.auth_env)))?;
        Ok(Self::new(cfg, token, sampling, template))
    }

    pub fn new(cfg: &RemoteConfig, token: String, sampling: SamplingConfig, template: PromptTemplate) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_millis(cfg.timeout_ms)))
            .build()
            .into();
        Self {
            endpoint: cfg.endpoint.clone(),
            model: cfg.model.clone(),
            token,
            sampling,
            template,
            max_retries: cfg.max_retries,
            backoff: Duration::from_millis(cfg.backoff_ms),
            agent,
            requests: AtomicUsize::new(0),
            malformed: AtomicUsize::new(0),
        }
    }

    /// HTTP requests sent, retries included.
    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::Relaxed)
    }

    /// Replies with no usable program, answered with the input unchanged.
    pub fn malformed(&self) -> usize {
        self.malformed.load(Ordering::Relaxed)
    }

    pub fn request_body(&self, prompt: &str) -> Value {
        json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.sampling.temperature,
            "top_p": self.sampling.top_p,
            "top_k": self.sampling.top_k,
        })
    }

    /// POST with exponential backoff on transport errors, 429 and 5xx.
    /// Other statuses fail at once.
    fn post(&self, body: &str) -> Result<String, ActorError> {
        let mut last = String::new();
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                std::thread::sleep(self.backoff.saturating_mul(1 << (attempt - 1).min(16)));
            }
            self.requests.fetch_add(1, Ordering::Relaxed);
            let sent = self
                .agent
                .post(&self.endpoint)
                .header("Authorization", &format!("Bearer {}", self.token))
                .header("Content-Type", "application/json")
                .send(body);
            match sent {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    if status == 200 {
                        return resp
                            .body_mut()
                            .read_to_string()
                            .map_err(|e| ActorError(format!("reading reply: {e}")));
                    }
                    last = format!("HTTP {status}");
                    if status != 429 && status < 500 {
                        return Err(ActorError(last));
                    }
                }
                Err(e) => last = e.to_string(),
            }
        }
        Err(ActorError(format!(
            "giving up after {} attempts: {last}",
            self.max_retries + 1
        )))
    }
}

/// Reply text from the common chat response shapes.
pub fn reply_text(body: &str) -> Option<String> {
    let v: Value = serde_json::from_str(body).ok()?;
    let candidates = [
        v.pointer("/choices/0/message/content"),
        v.pointer("/choices/0/text"),
        v.pointer("/content/0/text"),
        v.pointer("/message/content"),
        v.get("content"),
        v.get("response"),
    ];
    let text = candidates.into_iter().flatten().find_map(|c| c.as_str().map(str::to_string));
    text
}

impl Actor for RemoteActor {
    fn next(&self, program: &str, ctx: &ActorContext<'_>) -> Result<String, ActorError> {
        let prompt = self.template.render(&PromptEnvelope::from_context(program, ctx));
        let body = self.post(&self.request_body(&prompt).to_string())?;
        match reply_text(&body).as_deref().and_then(extract_program) {
            Some(p) => Ok(p),
            None => {
                self.malformed.fetch_add(1, Ordering::Relaxed);
                Ok(program.to_string())
            }
        }
    }
}

/// Plays back scripted versions per problem: the proposal made from step
/// `t` is `script[problem][t]`. Past the script it returns its input.
#[derive(Debug, Clone, Default)]
pub struct MockActor {
    pub script: BTreeMap<String, Vec<String>>,
}

impl MockActor {
    /// JSON object mapping problem ids to version lists.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read mock script {}: {e}", path.display())))?;
        let script = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("mock script {}: {e}", path.display())))?;
        Ok(Self { script })
    }
}

impl Actor for MockActor {
    fn next(&self, program: &str, ctx: &ActorContext<'_>) -> Result<String, ActorError> {
        Ok(self
            .script
            .get(&ctx.problem.problem_id)
            .and_then(|v| v.get(ctx.step))
            .cloned()
            .unwrap_or_else(|| program.to_string()))
    }
}

/// Random local edits: integer literals, arithmetic and comparison
/// operators, and missing `)` or `:` at line ends. Each site is edited with
/// probability `edit_rate` and at least one edit is made. The random stream
/// depends only on the seed, problem, sample and step.
#[derive(Debug, Clone)]
pub struct MutationActor {
    seed: u64,
    edit_rate: f64,
}

impl MutationActor {
    pub fn new(cfg: &MutationConfig, harness_seed: u64) -> Result<Self, CliError> {
        if !(0.0..=1.0).contains(&cfg.edit_rate) {
            return Err(CliError::Config("edit_rate must be in [0, 1]".into()));
        }
        Ok(Self {
            seed: cfg.seed.unwrap_or(harness_seed),
            edit_rate: cfg.edit_rate,
        })
    }

    pub fn mutate(&self, program: &str, problem_id: &str, sample: usize, step: usize) -> String {
        let mut h = fnv1a(problem_id.as_bytes());
        for x in [self.seed, sample as u64, step as u64] {
            h = (h ^ x).wrapping_mul(0x0000_0100_0000_01b3).rotate_left(29);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(h);
        let sites = mutation_sites(program);
        if sites.is_empty() {
            return program.to_string();
        }
        let mut chosen: Vec<&Site> = sites.iter().filter(|_| rng.random_bool(self.edit_rate)).collect();
        if chosen.is_empty() {
            chosen.push(sites.choose(&mut rng).expect("non-empty"));
        }
        let mut out = program.to_string();
        // Sites are in ascending order and disjoint, so edit back to front.
        for site in chosen.into_iter().rev() {
            let replacement = site.replacement(&program[site.start..site.end], &mut rng);
            out.replace_range(site.start..site.end, &replacement);
        }
        out
    }
}

impl Actor for MutationActor {
    fn next(&self, program: &str, ctx: &ActorContext<'_>) -> Result<String, ActorError> {
        Ok(self.mutate(program, &ctx.problem.problem_id, ctx.sample_index, ctx.step))
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SiteKind {
    Int,
    Op,
    /// Empty range at a line end that lacks a `)` or a `:`.
    Append(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Site {
    start: usize,
    end: usize,
    kind: SiteKind,
}

impl Site {
    fn replacement<R: Rng>(&self, text: &str, rng: &mut R) -> String {
        match self.kind {
            SiteKind::Int => {
                let n: u64 = text.parse().unwrap_or(0);
                let mut options = vec![n + 1, 0, 1];
                if n > 0 {
                    options.push(n - 1);
                }
                options.retain(|&m| m != n);
                options.choose(rng).expect("non-empty").to_string()
            }
            SiteKind::Op => op_alternatives(text).choose(rng).copied().unwrap_or(text).to_string(),
            SiteKind::Append(s) => s.to_string(),
        }
    }
}

const OPS: [&str; 12] = ["<=", ">=", "==", "!=", "//", "**", "+", "-", "*", "%", "<", ">"];

fn op_alternatives(op: &str) -> &'static [&'static str] {
    match op {
        "+" => &["-", "*"],
        "-" => &["+"],
        "*" => &["+", "//"],
        "//" => &["/", "*", "%"],
        "%" => &["//"],
        "**" => &["*"],
        "<" => &["<=", ">"],
        "<=" => &["<", ">="],
        ">" => &[">=", "<"],
        ">=" => &[">", "<="],
        "==" => &["!="],
        "!=" => &["=="],
        _ => &[],
    }
}

const BLOCK_KEYWORDS: [&str; 9] = ["if", "elif", "else", "for", "while", "def", "try", "except", "with"];

/// Editable sites in source order, skipping strings and comments.
fn mutation_sites(src: &str) -> Vec<Site> {
    let mut sites = Vec::new();
    let mut offset = 0;
    for line in src.split_inclusive('\n') {
        let body_len = line.trim_end_matches(['\n', '\r']).len();
        let code_end = scan_line(&line[..body_len], offset, &mut sites);
        let code = line[..code_end].trim_end();
        let end = offset + code.len();
        let opens = code.matches('(').count();
        if opens > code.matches(')').count() {
            sites.push(Site { start: end, end, kind: SiteKind::Append(")") });
        }
        let first = code.trim_start().split(|c: char| !c.is_alphanumeric() && c != '_').next().unwrap_or("");
        if BLOCK_KEYWORDS.contains(&first) && !code.ends_with(':') && opens <= code.matches(')').count() {
            sites.push(Site { start: end, end, kind: SiteKind::Append(":") });
        }
        offset += line.len();
    }
    sites
}

/// Collect literal and operator sites of one line. Returns the length of the
/// line before any comment.
fn scan_line(line: &str, offset: usize, sites: &mut Vec<Site>) -> usize {
    let bytes = line.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b'#' => return i,
            b'\'' | b'"' => {
                i += 1;
                while i < bytes.len() && bytes[i] != c {
                    i += if bytes[i] == b'\\' { 2 } else { 1 };
                }
                i += 1;
            }
            b'0'..=b'9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let prev_word = start > 0 && (bytes[start - 1].is_ascii_alphanumeric() || matches!(bytes[start - 1], b'_' | b'.'));
                let next_word = i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || matches!(bytes[i], b'_' | b'.'));
                if !prev_word && !next_word && i - start <= 18 {
                    sites.push(Site {
                        start: offset + start,
                        end: offset + i,
                        kind: SiteKind::Int,
                    });
                }
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
            }
            _ => {
                let rest = &line[i..];
                match OPS.iter().find(|op| rest.starts_with(**op)) {
                    // `->`, `+=` and friends are left alone except the
                    // arithmetic augmented assignments.
                    Some(op) if !rest.starts_with("->") => {
                        sites.push(Site {
                            start: offset + i,
                            end: offset + i + op.len(),
                            kind: SiteKind::Op,
                        });
                        i += op.len();
                    }
                    _ => i += 1,
                }
            }
        }
    }
    bytes.len()
}
