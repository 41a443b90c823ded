//! Parser for human-readable Lean/Lake build output.
//!
//! Two header forms are recognized:
//!
//! ```text
//! Foo/Bar.lean:3:17: error: type mismatch          (lean)
//! error: ././././Foo/Bar.lean:3:17: type mismatch  (lake >= 4.9)
//! ```
//!
//! Lean reports 0-based columns; [`Diagnostic::column`] is 1-based, so the
//! parsed value is the reported column plus one.

use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiagSeverity {
    Error,
    Warning,
    Info,
}

impl DiagSeverity {
    fn parse(s: &str) -> Option<DiagSeverity> {
        match s {
            "error" => Some(DiagSeverity::Error),
            "warning" => Some(DiagSeverity::Warning),
            "info" | "information" => Some(DiagSeverity::Info),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DiagSeverity::Error => "error",
            DiagSeverity::Warning => "warning",
            DiagSeverity::Info => "info",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: DiagSeverity,
    /// Path relative to the workspace root.
    pub file: String,
    /// 1-based.
    pub line: usize,
    /// 1-based.
    pub column: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}: {}: {}", self.file, self.line, self.column, self.severity.as_str(), self.message)
    }
}

fn lean_header() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^(\S+?):(\d+):(\d+)(?:-\d+:\d+)?: (error|warning|info|information)(?:\([^)]*\))?: ?(.*)$").unwrap()
    })
}

fn lake_header() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(error|warning|info): (\S+?):(\d+):(\d+)(?:-\d+:\d+)?: ?(.*)$").unwrap())
}

fn noise() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(concat!(
            r"^(?:",
            r"[✔✖⚠ℹ⣿⣷⣯⣟⡿⢿⣻⣽⣾]",
            r"|\s*\[\d+/\d+\]",
            r"|trace: ",
            r"|Build completed",
            r"|Some required builds logged failures:",
            r"|- [\w.«»']+$",
            r"|(?:error|warning|info): ",
            r"|Building |Compiling |Linking |Running |Replayed ",
            r")"
        ))
        .unwrap()
    })
}

/// Strips `./` prefixes repeated by Lake (`././././Foo.lean`).
pub fn normalize_path(path: &str) -> String {
    let mut p = path;
    while let Some(rest) = p.strip_prefix("./") {
        p = rest;
    }
    p.to_string()
}

/// Extracts every diagnostic record from raw build output, in order.
pub fn parse_diagnostics(raw: &[u8]) -> Vec<Diagnostic> {
    let text = String::from_utf8_lossy(raw);
    let mut out = Vec::new();
    let mut current: Option<Diagnostic> = None;

    for line in text.lines() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if let Some(d) = parse_header(line) {
            if let Some(done) = current.take() {
                out.push(finish(done));
            }
            current = Some(d);
        } else if noise().is_match(line) {
            if let Some(done) = current.take() {
                out.push(finish(done));
            }
        } else if let Some(d) = current.as_mut() {
            d.message.push('\n');
            d.message.push_str(line);
        }
    }
    if let Some(done) = current.take() {
        out.push(finish(done));
    }
    out
}

fn parse_header(line: &str) -> Option<Diagnostic> {
    if let Some(c) = lake_header().captures(line) {
        return Some(Diagnostic {
            severity: DiagSeverity::parse(&c[1])?,
            file: normalize_path(&c[2]),
            line: c[3].parse().ok()?,
            column: c[4].parse::<usize>().ok()? + 1,
            message: c[5].to_string(),
        });
    }
    let c = lean_header().captures(line)?;
    Some(Diagnostic {
        severity: DiagSeverity::parse(&c[4])?,
        file: normalize_path(&c[1]),
        line: c[2].parse().ok()?,
        column: c[3].parse::<usize>().ok()? + 1,
        message: c[5].to_string(),
    })
}

fn finish(mut d: Diagnostic) -> Diagnostic {
    let trimmed = d.message.trim_end();
    d.message = if trimmed.trim().is_empty() { format!("({} without message)", d.severity.as_str()) } else { trimmed.to_string() };
    d.line = d.line.max(1);
    d
}

/// Strict success: no errors and no warnings. Lenient: no errors.
pub fn is_success(diags: &[Diagnostic], strict: bool) -> bool {
    !diags
        .iter()
        .any(|d| d.severity == DiagSeverity::Error || (strict && d.severity == DiagSeverity::Warning))
}
