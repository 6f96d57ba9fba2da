//! Repair prompts.
//!
//! A template is plain text with `{{name}}` placeholders and optional
//! sections `{{#name}} ... {{/name}}` that are kept only when `name` has a
//! value. Known names: `description`, `time_limit_ms`, `memory_mb`,
//! `program`, `tests` and `feedback`.

use std::fmt::Write as _;
use std::path::Path;

use stepfix::repair_loop::ActorContext;
use stepfix::sandbox::TestCase;

use crate::CliError;

pub const DEFAULT_TEMPLATE: &str = include_str!("../templates/repair_prompt.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptEnvelope {
    pub description: String,
    pub time_limit_ms: u64,
    pub memory_bytes: u64,
    pub program: String,
    /// Judge feedback on `program`; only set in explicit-feedback mode.
    pub feedback: Option<String>,
    pub sample_tests: Vec<TestCase>,
}

impl PromptEnvelope {
    pub fn from_context(program: &str, ctx: &ActorContext<'_>) -> Self {
        Self {
            description: ctx.problem.description.clone(),
            time_limit_ms: ctx.problem.time_limit_ms,
            memory_bytes: ctx.problem.memory_bytes,
            program: program.to_string(),
            feedback: ctx.feedback.map(str::to_string),
            sample_tests: ctx.problem.sample_tests.clone(),
        }
    }

    fn value(&self, name: &str) -> Option<String> {
        match name {
            "description" => Some(self.description.trim_end().to_string()),
            "time_limit_ms" => Some(self.time_limit_ms.to_string()),
            "memory_mb" => Some((self.memory_bytes >> 20).to_string()),
            "program" => Some(self.program.trim_end().to_string()),
            "feedback" => self.feedback.as_ref().map(|f| f.trim_end().to_string()),
            "tests" if !self.sample_tests.is_empty() => {
                let mut out = String::new();
                for (i, t) in self.sample_tests.iter().enumerate() {
                    let _ = write!(
                        out,
                        "Input {n}:\n{}\nOutput {n}:\n{}\n",
                        String::from_utf8_lossy(&t.input).trim_end(),
                        String::from_utf8_lossy(&t.expected_output).trim_end(),
                        n = i + 1
                    );
                }
                Some(out.trim_end().to_string())
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    text: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self {
            text: DEFAULT_TEMPLATE.to_string(),
        }
    }
}

impl PromptTemplate {
    pub fn new(text: impl Into<String>) -> Result<Self, CliError> {
        let template = Self { text: text.into() };
        template.check()?;
        Ok(template)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read template {}: {e}", path.display())))?;
        Self::new(text)
    }

    /// Every `{{` is closed and every section is closed in order.
    fn check(&self) -> Result<(), CliError> {
        let mut open: Vec<&str> = Vec::new();
        let mut rest = self.text.as_str();
        while let Some(start) = rest.find("{{") {
            let end = rest[start..]
                .find("}}")
                .ok_or_else(|| CliError::Config("unclosed `{{` in prompt template".into()))?;
            let tag = &rest[start + 2..start + end];
            if let Some(name) = tag.strip_prefix('#') {
                open.push(name);
            } else if let Some(name) = tag.strip_prefix('/') {
                if open.pop() != Some(name) {
                    return Err(CliError::Config(format!("unbalanced section `{name}` in prompt template")));
                }
            }
            rest = &rest[start + end + 2..];
        }
        match open.pop() {
            Some(name) => Err(CliError::Config(format!("section `{name}` is never closed"))),
            None => Ok(()),
        }
    }

    pub fn render(&self, envelope: &PromptEnvelope) -> String {
        let mut out = String::with_capacity(self.text.len() + envelope.program.len());
        render_into(&self.text, envelope, &mut out);
        out
    }
}

fn render_into(text: &str, env: &PromptEnvelope, out: &mut String) {
    let mut rest = text;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let end = start + rest[start..].find("}}").expect("checked");
        let tag = &rest[start + 2..end];
        rest = &rest[end + 2..];
        if let Some(name) = tag.strip_prefix('#') {
            let close = format!("{{{{/{name}}}}}");
            let body_end = rest.find(&close).expect("checked");
            let body = rest[..body_end].strip_prefix('\n').unwrap_or(&rest[..body_end]);
            if env.value(name).is_some() {
                render_into(body, env, out);
            }
            rest = &rest[body_end + close.len()..];
            rest = rest.strip_prefix('\n').unwrap_or(rest);
        } else {
            out.push_str(&env.value(tag).unwrap_or_default());
        }
    }
    out.push_str(rest);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn envelope() -> PromptEnvelope {
        PromptEnvelope {
            description: "Add two numbers.".into(),
            time_limit_ms: 1000,
            memory_bytes: 256 << 20,
            program: "print(1)\n".into(),
            feedback: None,
            sample_tests: vec![],
        }
    }

    #[test]
    fn default_template_fields() {
        let text = PromptTemplate::default().render(&envelope());
        assert!(text.contains("Add two numbers."));
        assert!(text.contains("Time limit: 1000 ms"));
        assert!(text.contains("Memory limit: 256 MB"));
        assert!(text.contains("```python\nprint(1)\n```"));
        assert!(!text.contains("{{"));
        assert!(!text.contains("feedback"));
        assert!(!text.contains("Sample tests"));
    }

    #[test]
    fn feedback_section_only_with_feedback() {
        let mut env = envelope();
        env.feedback = Some("WA on test 2".into());
        env.sample_tests = vec![TestCase::new("1", "1 2\n", "3\n")];
        let text = PromptTemplate::default().render(&env);
        assert!(text.contains("### Judge feedback on this program\nWA on test 2\n"));
        assert!(text.contains("Input 1:\n1 2\nOutput 1:\n3"));
    }

    #[test]
    fn custom_template() {
        let t = PromptTemplate::new("[{{program}}]{{#feedback}} fb={{feedback}}{{/feedback}}").unwrap();
        assert_eq!(t.render(&envelope()), "[print(1)]");
        let mut env = envelope();
        env.feedback = Some("TLE".into());
        assert_eq!(t.render(&env), "[print(1)] fb=TLE");
    }

    #[test]
    fn malformed_templates_are_rejected() {
        for text in ["{{program", "{{#tests}} no end", "{{#a}}{{#b}}{{/a}}{{/b}}"] {
            assert!(PromptTemplate::new(text).is_err(), "{text}");
        }
    }
}
