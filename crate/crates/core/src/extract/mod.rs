//! LaTeX source to validated [`StatementSet`]: a deterministic environment
//! scan followed by one extraction call and `passes - 1` refinement calls.

pub mod source;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use source::{default_env_map, scan_environments, RawCandidate, SourceDocument};

use crate::gateway::{AskError, Gateway, GatewayError, Message};
use crate::prompts::Prompts;
use crate::statement::{
    parse_statement_set, serialize_statement_set, topological_order, validate, Issue, Severity, StatementError,
    StatementKind, StatementSet, ValidationReport,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionConfig {
    /// Extraction call plus `passes - 1` refinement calls.
    pub passes: u32,
    pub env_map: BTreeMap<String, StatementKind>,
    /// Longer statement texts are validation errors; longer candidate
    /// bodies are truncated in prompts.
    pub max_statement_chars: usize,
    /// Total calls allowed per request when replies do not parse.
    pub reprompt_budget: u32,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig { passes: 3, env_map: default_env_map(), max_statement_chars: 8000, reprompt_budget: 3 }
    }
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("input error: {0}")]
    Input(String),
    #[error("unbalanced environment `{env}` begun at byte {offset} (line {line})")]
    Unbalanced { env: String, offset: usize, line: usize },
    #[error("extraction config: {0}")]
    Config(String),
    #[error("unparseable reply for `{tag}` after {calls} call(s): {error}")]
    Unparseable { tag: String, calls: u32, error: String, last_reply: String },
    #[error("extracted statements do not validate{}:\n{report}", .cycle.as_ref().map(|c| format!(" (cycle {})", c.join(" -> "))).unwrap_or_default())]
    Invalid { report: ValidationReport, cycle: Option<Vec<String>> },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

impl From<AskError> for ExtractError {
    fn from(e: AskError) -> Self {
        match e {
            AskError::Gateway(g) => ExtractError::Gateway(g),
            AskError::Unparseable { tag, calls, error, last_reply } => {
                ExtractError::Unparseable { tag, calls, error, last_reply }
            }
        }
    }
}

/// Pulls the JSON payload out of a reply that may wrap it in prose or a
/// code fence.
pub fn reply_json(reply: &str) -> &str {
    if let Some(open) = reply.find("```") {
        let after = &reply[open + 3..];
        let body_start = after.find('\n').map_or(0, |i| i + 1);
        let body = &after[body_start..];
        if let Some(close) = body.find("```") {
            return body[..close].trim();
        }
    }
    let start = reply.find(['{', '[']);
    let end = reply.rfind(['}', ']']);
    match (start, end) {
        (Some(s), Some(e)) if e >= s => &reply[s..=e],
        _ => reply.trim(),
    }
}

/// Parses a backend reply into a statement set carrying `fingerprint`.
pub fn parse_reply(reply: &str, fingerprint: &str) -> Result<StatementSet, String> {
    let json = reply_json(reply);
    let mut value: Value = serde_json::from_str(json).map_err(|e| format!("reply is not valid JSON: {e}"))?;
    if value.is_array() {
        value = serde_json::json!({ "statements": value });
    }
    let obj = value.as_object_mut().ok_or("reply is not a JSON object")?;
    obj.insert("source_fingerprint".to_string(), Value::String(fingerprint.to_string()));
    let bytes = serde_json::to_vec(&value).map_err(|e| e.to_string())?;
    parse_statement_set(&bytes).map_err(|e| e.to_string())
}

pub struct Extractor<'a> {
    gateway: &'a Gateway,
    config: &'a ExtractionConfig,
    prompts: &'a Prompts,
}

impl<'a> Extractor<'a> {
    pub fn new(gateway: &'a Gateway, config: &'a ExtractionConfig, prompts: &'a Prompts) -> Self {
        Extractor { gateway, config, prompts }
    }

    fn ask(&self, tag: &str, user: String, doc: &SourceDocument) -> Result<StatementSet, ExtractError> {
        let messages = vec![Message::system(self.prompts.render("extract/system", &[])), Message::user(user)];
        let set = self.gateway.ask_parsed(
            tag,
            messages,
            self.config.reprompt_budget,
            |error| self.prompts.render("extract/reprompt", &[("error", error)]),
            |reply| parse_reply(reply, &doc.fingerprint),
        )?;
        Ok(set)
    }

    fn candidates_text(&self, candidates: &[RawCandidate]) -> String {
        if candidates.is_empty() {
            return "(none)".to_string();
        }
        candidates
            .iter()
            .map(|c| {
                let mut body = c.body.trim().to_string();
                if body.chars().count() > self.config.max_statement_chars {
                    body = body.chars().take(self.config.max_statement_chars).collect::<String>() + " [truncated]";
                }
                let kind = self.config.env_map.get(&c.env_name).map(|k| k.as_str());
                let line = serde_json::json!({ "env": c.env_name, "kind": kind, "label": c.label, "title": c.title, "body": body });
                crate::canonical::to_canonical_line(&line).expect("candidate serializes")
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// First extraction call over the full source and the scanned candidates.
    pub fn llm_extract(&self, doc: &SourceDocument, candidates: &[RawCandidate]) -> Result<StatementSet, ExtractError> {
        let user = self.prompts.render(
            "extract/extract",
            &[("source", &doc.raw), ("candidates", &self.candidates_text(candidates))],
        );
        self.ask("extract/pass1", user, doc)
    }

    /// One refinement round; `pass` (>= 2) only labels the request.
    pub fn refine_pass(&self, set: &StatementSet, doc: &SourceDocument, pass: u32) -> Result<StatementSet, ExtractError> {
        let report = self.report(set).to_string();
        let previous = String::from_utf8(serialize_statement_set(set)).expect("canonical JSON is UTF-8");
        let user = self.prompts.render(
            "extract/refine",
            &[("source", &doc.raw), ("previous", &previous), ("report", &report)],
        );
        self.ask(&format!("extract/pass{pass}"), user, doc)
    }

    fn repair_pass(&self, set: &StatementSet, doc: &SourceDocument, report: &ValidationReport) -> Result<StatementSet, ExtractError> {
        let previous = String::from_utf8(serialize_statement_set(set)).expect("canonical JSON is UTF-8");
        let user = self.prompts.render(
            "extract/repair",
            &[("source", &doc.raw), ("previous", &previous), ("report", &report.to_string())],
        );
        self.ask("extract/repair", user, doc)
    }

    /// [`validate`] plus the configured length limit.
    pub fn report(&self, set: &StatementSet) -> ValidationReport {
        let mut issues = validate(set).issues;
        for s in &set.statements {
            let n = s.text.chars().count();
            if n > self.config.max_statement_chars {
                issues.push(Issue {
                    severity: Severity::Error,
                    subject: s.id.to_string(),
                    message: format!("text has {n} characters, limit {}", self.config.max_statement_chars),
                });
            }
        }
        ValidationReport::from_issues(issues)
    }

    /// Scan, extract, refine, validate (with one repair attempt), and order.
    pub fn extract(&self, doc: &SourceDocument) -> Result<StatementSet, ExtractError> {
        if self.config.passes == 0 {
            return Err(ExtractError::Config("passes must be at least 1".to_string()));
        }
        let candidates = scan_environments(doc, &self.config.env_map)?;
        tracing::info!(candidates = candidates.len(), "scanned environments");
        let mut set = self.llm_extract(doc, &candidates)?;
        for pass in 2..=self.config.passes {
            set = self.refine_pass(&set, doc, pass)?;
        }
        // ordering alone is fixed here rather than by a repair call
        let reorder = |set: StatementSet| set.topologically_sorted().unwrap_or(set);
        set = reorder(set);
        let mut report = self.report(&set);
        if !report.ok {
            tracing::warn!(%report, "extracted set invalid, attempting repair");
            set = reorder(self.repair_pass(&set, doc, &report)?);
            report = self.report(&set);
        }
        if !report.ok {
            let cycle = match topological_order(&set) {
                Err(StatementError::Cycle(w)) => Some(w),
                _ => None,
            };
            return Err(ExtractError::Invalid { report, cycle });
        }
        set.topologically_sorted().map_err(|e| ExtractError::Invalid {
            report: ValidationReport::from_issues(vec![Issue {
                severity: Severity::Error,
                subject: "<set>".to_string(),
                message: e.to_string(),
            }]),
            cycle: None,
        })
    }
}
