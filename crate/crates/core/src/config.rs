//! Run configuration: one JSON file with a section per stage.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::LoopConfig;
use crate::extract::ExtractionConfig;
use crate::gateway::{BackendConfig, BackendMode};
use crate::lean::WorkspaceConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// LaTeX source, when the command line does not give one.
    pub paper: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Directory of prompt template overrides.
    pub prompts_dir: Option<PathBuf>,
    pub extraction: ExtractionConfig,
    #[serde(rename = "loop")]
    pub formalization: LoopConfig,
    pub backend: BackendConfig,
    pub workspace: WorkspaceConfig,
    /// Calls per informalization request when replies do not parse.
    pub informalize_reprompt_budget: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            paper: None,
            output_dir: PathBuf::from("out"),
            prompts_dir: None,
            extraction: ExtractionConfig::default(),
            formalization: LoopConfig::default(),
            backend: BackendConfig::default(),
            workspace: WorkspaceConfig::default(),
            informalize_reprompt_budget: 3,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path} at `{field}`: {message}")]
    Parse { path: PathBuf, field: String, message: String },
    #[error("invalid backend `{0}`; expected live, scripted:<file>, record:<path> or replay:<path>")]
    Backend(String),
}

impl RunConfig {
    /// Loads a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let mut cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
            path: path.into(),
            field: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.paper.as_mut() {
            join(p);
        }
        join(&mut self.output_dir);
        if let Some(p) = self.prompts_dir.as_mut() {
            join(p);
        }
        join(&mut self.workspace.root);
        if let Some(p) = self.backend.transcript_path.as_mut() {
            join(p);
        }
        if let Some(p) = self.backend.script_path.as_mut() {
            join(p);
        }
        // builds run inside the workspace, so files named next to the config
        // must become absolute
        for arg in self.workspace.build_command.iter_mut() {
            if Path::new(arg.as_str()).is_relative() && arg.contains(['/', '.']) {
                if let Ok(local) = fs::canonicalize(base.join(arg.as_str())) {
                    *arg = local.to_string_lossy().into_owned();
                }
            }
        }
    }

    /// Applies a `--backend` value.
    pub fn apply_backend_spec(&mut self, spec: &str) -> Result<(), ConfigError> {
        let (mode, path) = match spec.split_once(':') {
            None if spec == "live" => (BackendMode::Live, None),
            Some((m, p)) if !p.is_empty() => {
                let mode = match m {
                    "scripted" => BackendMode::Scripted,
                    "record" => BackendMode::Record,
                    "replay" => BackendMode::Replay,
                    _ => return Err(ConfigError::Backend(spec.to_string())),
                };
                (mode, Some(PathBuf::from(p)))
            }
            _ => return Err(ConfigError::Backend(spec.to_string())),
        };
        self.backend.mode = mode;
        match mode {
            BackendMode::Scripted => self.backend.script_path = path,
            BackendMode::Record | BackendMode::Replay => self.backend.transcript_path = path,
            BackendMode::Live => {}
        }
        Ok(())
    }
}
