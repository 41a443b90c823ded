//! The resumable run manifest at `<workspace>/.merlean/manifest.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{LoopConfig, StatementResult};
use crate::canonical::{atomic_write, to_canonical_json};
use crate::lean::{DeclKind, UnsoundnessCensus};
use crate::statement::StatementId;

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_REL_PATH: &str = ".merlean/manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinalBuild {
    pub success: bool,
    pub errors: usize,
    pub warnings: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CensusSummary {
    pub sorry_count: usize,
    pub axiom_names: Vec<String>,
    pub declaration_counts: BTreeMap<DeclKind, usize>,
    pub total_declarations: usize,
    pub total_lines: usize,
}

impl From<&UnsoundnessCensus> for CensusSummary {
    fn from(c: &UnsoundnessCensus) -> Self {
        CensusSummary {
            sorry_count: c.sorry_count,
            axiom_names: c.axiom_names.iter().map(|a| a.name.clone()).collect(),
            declaration_counts: c.declaration_counts.clone(),
            total_declarations: c.total_declarations(),
            total_lines: c.total_lines,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub schema_version: u32,
    pub status: RunStatus,
    pub lib_name: String,
    pub toolchain: String,
    pub source_fingerprint: String,
    pub loop_config: LoopConfig,
    /// Dependency order of the input set.
    pub order: Vec<StatementId>,
    /// Results in processed order.
    pub results: Vec<StatementResult>,
    pub warnings: Vec<String>,
    pub extraction_wall_ms: Option<u64>,
    pub formalization_wall_ms: u64,
    pub final_build: Option<FinalBuild>,
    pub census: Option<CensusSummary>,
}

impl RunManifest {
    pub fn result(&self, id: &StatementId) -> Option<&StatementResult> {
        self.results.iter().find(|r| &r.statement_id == id)
    }
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid manifest {path} at `{field}`: {message}")]
    Invalid { path: PathBuf, field: String, message: String },
    #[error("manifest {path} has schema version {found}, expected {expected}")]
    Version { path: PathBuf, found: u64, expected: u32 },
}

pub fn manifest_path(workspace_root: &Path) -> PathBuf {
    workspace_root.join(MANIFEST_REL_PATH)
}

/// Atomic write of the canonical form.
pub fn save_manifest(path: &Path, manifest: &RunManifest) -> std::io::Result<()> {
    let bytes = to_canonical_json(manifest).map_err(std::io::Error::other)?;
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    atomic_write(path, &bytes)
}

/// Loads and validates a manifest; errors name the first invalid field.
pub fn load_manifest(path: &Path) -> Result<RunManifest, ManifestError> {
    let bytes = fs::read(path).map_err(|source| ManifestError::Io { path: path.to_path_buf(), source })?;
    let value: serde_json::Value = serde_json::from_slice(&bytes).map_err(|e| ManifestError::Invalid {
        path: path.to_path_buf(),
        field: "<document>".to_string(),
        message: e.to_string(),
    })?;
    match value.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(SCHEMA_VERSION) => {}
        Some(found) => return Err(ManifestError::Version { path: path.to_path_buf(), found, expected: SCHEMA_VERSION }),
        None => {
            return Err(ManifestError::Invalid {
                path: path.to_path_buf(),
                field: "schema_version".to_string(),
                message: "missing or not an integer".to_string(),
            })
        }
    }
    serde_path_to_error::deserialize(value).map_err(|e| ManifestError::Invalid {
        path: path.to_path_buf(),
        field: e.path().to_string(),
        message: e.into_inner().to_string(),
    })
}
