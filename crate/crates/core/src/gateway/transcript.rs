use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ChatRequest, ChatResponse};
use crate::canonical::to_canonical_line;

/// One backend call, as persisted in a `.jsonl` transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub hash: String,
    pub tag: String,
    pub request: ChatRequest,
    pub response: ChatResponse,
    pub t: String,
}

/// Append-only call log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transcript {
    records: Vec<TranscriptRecord>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: TranscriptRecord) {
        self.records.push(record);
    }

    pub fn records(&self) -> &[TranscriptRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records whose stored hash does not match their stored request.
    pub fn hash_mismatches(&self, strict: bool) -> Vec<usize> {
        self.records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.request.hash(strict) != r.hash)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn load(path: &Path) -> std::io::Result<Transcript> {
        let reader = BufReader::new(File::open(path)?);
        let mut records = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record = serde_json::from_str(&line).map_err(|e| {
                std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("{}:{}: {e}", path.display(), n + 1),
                )
            })?;
            records.push(record);
        }
        Ok(Transcript { records })
    }

    pub fn to_jsonl(&self) -> String {
        self.records.iter().map(|r| record_line(r) + "\n").collect()
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        crate::canonical::atomic_write(path, self.to_jsonl().as_bytes())
    }
}

pub(crate) fn record_line(record: &TranscriptRecord) -> String {
    to_canonical_line(record).expect("transcript records serialize")
}

pub(crate) fn append_record(file: &mut File, record: &TranscriptRecord) -> std::io::Result<()> {
    writeln!(file, "{}", record_line(record))?;
    file.flush()
}
