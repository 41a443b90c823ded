//! Leak detection over transcripts: informalization requests must not carry
//! any original statement text or paper content.

use serde::Serialize;

use super::Transcript;
use crate::canonical::normalize_whitespace;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditFinding {
    pub call_index: usize,
    pub forbidden_index: usize,
    pub message_index: usize,
    /// Byte offset of the match in the whitespace-normalized message.
    pub offset: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    pub findings: Vec<AuditFinding>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Reports every occurrence of a forbidden text inside any request message.
/// Both sides are whitespace-normalized; forbidden texts that normalize to
/// nothing are ignored.
pub fn audit_transcript(transcript: &Transcript, forbidden_texts: &[String]) -> AuditReport {
    let needles: Vec<String> = forbidden_texts
        .iter()
        .map(|t| normalize_whitespace(t).trim().to_string())
        .collect();
    let mut findings = Vec::new();
    for (call_index, record) in transcript.records().iter().enumerate() {
        for (message_index, message) in record.request.messages.iter().enumerate() {
            let haystack = normalize_whitespace(&message.content);
            for (forbidden_index, needle) in needles.iter().enumerate() {
                if needle.is_empty() {
                    continue;
                }
                for (offset, _) in haystack.match_indices(needle.as_str()) {
                    findings.push(AuditFinding { call_index, forbidden_index, message_index, offset });
                }
            }
        }
    }
    AuditReport { findings }
}
