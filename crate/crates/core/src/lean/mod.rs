//! The Lean project on disk: scaffolding, module files, builds, census.

pub mod census;
pub mod decls;
pub mod diagnostics;
pub mod lexer;

use std::cmp::Ordering;
use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use wait_timeout::ChildExt;

use crate::canonical::{atomic_write, to_canonical_json};
use crate::statement::StatementId;

pub use census::{Location, NamedLocation, UnsoundnessCensus};
pub use decls::DeclKind;
pub use diagnostics::{is_success, parse_diagnostics, DiagSeverity, Diagnostic};

const MARKER: &str = ".merlean/workspace.json";
const LOG_DIR: &str = ".merlean/logs";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyPin {
    pub git: String,
    pub rev: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkspaceConfig {
    pub root: PathBuf,
    pub lib_name: String,
    pub toolchain: String,
    pub mathlib: Option<DependencyPin>,
    pub build_timeout_ms: u64,
    /// Passed to the toolchain as `LEAN_NUM_THREADS`.
    pub jobs: u32,
    /// Program and arguments; a module target is appended for per-module builds.
    pub build_command: Vec<String>,
    /// Warnings fail a build (the default). Off only for scaffolding experiments.
    pub strict: bool,
}

impl Default for WorkspaceConfig {
    fn default() -> Self {
        WorkspaceConfig {
            root: PathBuf::from("workspace"),
            lib_name: "Merlean".to_string(),
            toolchain: "leanprover/lean4:v4.15.0".to_string(),
            mathlib: Some(DependencyPin {
                git: "https://github.com/leanprover-community/mathlib4".to_string(),
                rev: "v4.15.0".to_string(),
            }),
            build_timeout_ms: 20 * 60 * 1000,
            jobs: 1,
            build_command: vec!["lake".to_string(), "build".to_string()],
            strict: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum WorkspaceError {
    #[error("environment error: {0}")]
    Environment(String),
    #[error("refusing to initialize workspace: {0}")]
    Refused(String),
    #[error("not a workspace: {0}")]
    NotAWorkspace(String),
    #[error("workspace I/O error: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildReport {
    pub success: bool,
    pub diagnostics: Vec<Diagnostic>,
    pub duration_ms: u64,
    #[serde(skip)]
    pub raw_output: Vec<u8>,
    pub exit_code: Option<i32>,
    pub timed_out: bool,
}

impl BuildReport {
    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.severity == DiagSeverity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.severity == DiagSeverity::Warning)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Marker {
    lib_name: String,
    toolchain: String,
}

#[derive(Debug)]
pub struct Workspace {
    config: WorkspaceConfig,
    build_lock: Mutex<()>,
    import_lock: Mutex<()>,
    log_seq: AtomicU64,
}

/// Creates (or reopens, when already initialized for the same library) a
/// workspace.
pub fn init_workspace(config: WorkspaceConfig) -> Result<Workspace, WorkspaceError> {
    if config.lib_name.is_empty() || !config.lib_name.chars().all(|c| c.is_alphanumeric() || c == '_') {
        return Err(WorkspaceError::Refused(format!("invalid library name `{}`", config.lib_name)));
    }
    let root = &config.root;
    if root.exists() {
        let marker = root.join(MARKER);
        if marker.exists() {
            let m: Marker = serde_json::from_slice(&fs::read(&marker)?)
                .map_err(|e| WorkspaceError::Refused(format!("unreadable workspace marker: {e}")))?;
            if m.lib_name != config.lib_name {
                return Err(WorkspaceError::Refused(format!(
                    "{} is a workspace for library `{}`, not `{}`",
                    root.display(),
                    m.lib_name,
                    config.lib_name
                )));
            }
            check_toolchain(&config)?;
            return Ok(Workspace::new(config));
        }
        if fs::read_dir(root)?.next().is_some() {
            return Err(WorkspaceError::Refused(format!("{} is not empty and is not a workspace", root.display())));
        }
    }
    check_toolchain(&config)?;

    let lib = &config.lib_name;
    fs::create_dir_all(root.join(lib).join("Statements"))?;
    fs::create_dir_all(root.join(LOG_DIR))?;
    atomic_write(&root.join("lakefile.toml"), lakefile(&config).as_bytes())?;
    atomic_write(&root.join("lean-toolchain"), format!("{}\n", config.toolchain).as_bytes())?;
    atomic_write(&root.join(format!("{lib}.lean")), b"")?;
    atomic_write(&root.join(".gitignore"), b"/.lake\n")?;
    let marker = Marker { lib_name: lib.clone(), toolchain: config.toolchain.clone() };
    atomic_write(&root.join(MARKER), &to_canonical_json(&marker).expect("marker serializes"))?;
    Ok(Workspace::new(config))
}

fn check_toolchain(config: &WorkspaceConfig) -> Result<(), WorkspaceError> {
    let program = config
        .build_command
        .first()
        .ok_or_else(|| WorkspaceError::Environment("empty build command".to_string()))?;
    which::which(program)
        .map(|_| ())
        .map_err(|_| WorkspaceError::Environment(format!("build tool `{program}` not found")))
}

fn lakefile(config: &WorkspaceConfig) -> String {
    let lib = &config.lib_name;
    let mut s = format!("name = \"{}\"\ndefaultTargets = [\"{lib}\"]\n", lib.to_lowercase());
    if let Some(m) = &config.mathlib {
        s.push_str(&format!("\n[[require]]\nname = \"mathlib\"\ngit = \"{}\"\nrev = \"{}\"\n", m.git, m.rev));
    }
    s.push_str(&format!("\n[[lean_lib]]\nname = \"{lib}\"\n"));
    s
}

/// Orders strings with embedded numbers numerically (`Def_2` < `Def_10`).
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    fn chunks(s: &str) -> Vec<(bool, &str)> {
        let mut out = Vec::new();
        let mut start = 0;
        let bytes = s.as_bytes();
        for i in 1..=bytes.len() {
            if i == bytes.len() || bytes[i].is_ascii_digit() != bytes[start].is_ascii_digit() {
                out.push((bytes[start].is_ascii_digit(), &s[start..i]));
                start = i;
            }
        }
        out
    }
    let (ca, cb) = (chunks(a), chunks(b));
    for (x, y) in ca.iter().zip(cb.iter()) {
        let ord = match (x, y) {
            ((true, p), (true, q)) => {
                let (p, q) = (p.trim_start_matches('0'), q.trim_start_matches('0'));
                p.len().cmp(&q.len()).then_with(|| p.cmp(q))
            }
            ((_, p), (_, q)) => p.cmp(q),
        };
        if ord != Ordering::Equal {
            return ord;
        }
    }
    ca.len().cmp(&cb.len()).then_with(|| a.cmp(b))
}

impl Workspace {
    fn new(config: WorkspaceConfig) -> Workspace {
        let existing = fs::read_dir(config.root.join(LOG_DIR)).map(|d| d.count() as u64).unwrap_or(0);
        Workspace { config, build_lock: Mutex::new(()), import_lock: Mutex::new(()), log_seq: AtomicU64::new(existing) }
    }

    /// Opens an initialized workspace without touching the toolchain.
    pub fn open(config: WorkspaceConfig) -> Result<Workspace, WorkspaceError> {
        let marker = config.root.join(MARKER);
        let m: Marker = fs::read(&marker)
            .ok()
            .and_then(|b| serde_json::from_slice(&b).ok())
            .ok_or_else(|| WorkspaceError::NotAWorkspace(config.root.display().to_string()))?;
        if m.lib_name != config.lib_name {
            return Err(WorkspaceError::NotAWorkspace(format!(
                "{} holds library `{}`",
                config.root.display(),
                m.lib_name
            )));
        }
        Ok(Workspace::new(config))
    }

    pub fn config(&self) -> &WorkspaceConfig {
        &self.config
    }

    pub fn root(&self) -> &Path {
        &self.config.root
    }

    pub fn lib_name(&self) -> &str {
        &self.config.lib_name
    }

    /// `Lib.Statements.Def_1`
    pub fn module_name(&self, id: &StatementId) -> String {
        format!("{}.Statements.{}", self.config.lib_name, id)
    }

    /// `Lib/Statements/Def_1.lean`, relative to the root.
    pub fn module_rel_path(&self, id: &StatementId) -> String {
        format!("{}/Statements/{}.lean", self.config.lib_name, id)
    }

    pub fn module_path(&self, id: &StatementId) -> PathBuf {
        self.config.root.join(self.module_rel_path(id))
    }

    pub fn root_file_rel(&self) -> String {
        format!("{}.lean", self.config.lib_name)
    }

    pub fn read_module(&self, id: &StatementId) -> io::Result<Option<String>> {
        match fs::read_to_string(self.module_path(id)) {
            Ok(s) => Ok(Some(s)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Writes `Statements/<Id>.lean` atomically and registers it in the
    /// root import file exactly once.
    pub fn write_module(&self, id: &StatementId, code: &str) -> Result<PathBuf, WorkspaceError> {
        let path = self.module_path(id);
        atomic_write(&path, code.as_bytes())?;
        self.register_import(&self.module_name(id))?;
        Ok(path)
    }

    fn register_import(&self, module: &str) -> io::Result<()> {
        let _guard = self.import_lock.lock().unwrap_or_else(|e| e.into_inner());
        let root_file = self.config.root.join(self.root_file_rel());
        let existing = fs::read_to_string(&root_file).unwrap_or_default();
        let mut modules: Vec<String> =
            existing.lines().filter_map(|l| l.trim().strip_prefix("import ")).map(|m| m.trim().to_string()).collect();
        if modules.iter().any(|m| m == module) {
            return Ok(());
        }
        modules.push(module.to_string());
        modules.sort_by(|a, b| natural_cmp(a, b));
        modules.dedup();
        let text: String = modules.iter().map(|m| format!("import {m}\n")).collect();
        atomic_write(&root_file, text.as_bytes())
    }

    /// Modules listed in the root import file.
    pub fn registered_modules(&self) -> io::Result<Vec<String>> {
        let text = fs::read_to_string(self.config.root.join(self.root_file_rel())).unwrap_or_default();
        Ok(text.lines().filter_map(|l| l.strip_prefix("import ")).map(str::to_string).collect())
    }

    /// Full project build.
    pub fn build(&self) -> Result<BuildReport, WorkspaceError> {
        self.run_build(None)
    }

    /// Builds one statement module and its imports.
    pub fn build_module(&self, id: &StatementId) -> Result<BuildReport, WorkspaceError> {
        self.run_build(Some(self.module_name(id)))
    }

    fn run_build(&self, target: Option<String>) -> Result<BuildReport, WorkspaceError> {
        let _guard = self.build_lock.lock().unwrap_or_else(|e| e.into_inner());
        let started = Instant::now();
        let argv = &self.config.build_command;
        let mut cmd = Command::new(&argv[0]);
        cmd.args(&argv[1..])
            .args(target.iter())
            .current_dir(&self.config.root)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        if self.config.jobs > 0 {
            cmd.env("LEAN_NUM_THREADS", self.config.jobs.to_string());
        }
        #[cfg(unix)]
        {
            use std::os::unix::process::CommandExt;
            cmd.process_group(0);
        }
        let mut child = cmd
            .spawn()
            .map_err(|e| WorkspaceError::Environment(format!("cannot start build tool `{}`: {e}", argv[0])))?;

        let readers: Vec<_> = [
            child.stdout.take().map(|s| Box::new(s) as Box<dyn Read + Send>),
            child.stderr.take().map(|s| Box::new(s) as Box<dyn Read + Send>),
        ]
        .into_iter()
        .flatten()
        .map(|mut r| {
            std::thread::spawn(move || {
                let mut buf = Vec::new();
                let _ = r.read_to_end(&mut buf);
                buf
            })
        })
        .collect();

        let timeout = Duration::from_millis(self.config.build_timeout_ms);
        let (status, timed_out) = match child.wait_timeout(timeout)? {
            Some(status) => (Some(status), false),
            None => {
                kill_tree(&mut child);
                (child.wait().ok(), true)
            }
        };
        let mut raw = Vec::new();
        for r in readers {
            let chunk = r.join().unwrap_or_default();
            if !raw.is_empty() && !raw.ends_with(b"\n") && !chunk.is_empty() {
                raw.push(b'\n');
            }
            raw.extend_from_slice(&chunk);
        }

        let mut diagnostics = parse_diagnostics(&raw);
        for d in &mut diagnostics {
            d.file = self.relative_path(&d.file);
        }
        let exit_code = if timed_out { None } else { status.and_then(|s| s.code()) };
        if timed_out {
            diagnostics.push(self.synthetic("build timeout".to_string()));
        } else if exit_code != Some(0) && !diagnostics.iter().any(|d| d.severity == DiagSeverity::Error) {
            let detail = String::from_utf8_lossy(&raw)
                .lines()
                .find(|l| l.starts_with("error:"))
                .map(|l| format!(" ({l})"))
                .unwrap_or_default();
            let code = exit_code.map_or("signal".to_string(), |c| c.to_string());
            diagnostics.push(self.synthetic(format!("build tool exited with status {code}{detail}")));
        }
        let success = is_success(&diagnostics, self.config.strict);
        let report = BuildReport {
            success,
            diagnostics,
            duration_ms: started.elapsed().as_millis() as u64,
            raw_output: raw,
            exit_code,
            timed_out,
        };
        self.log_build(argv, target.as_deref(), &report)?;
        Ok(report)
    }

    fn synthetic(&self, message: String) -> Diagnostic {
        Diagnostic { severity: DiagSeverity::Error, file: self.root_file_rel(), line: 1, column: 1, message }
    }

    fn relative_path(&self, file: &str) -> String {
        let p = Path::new(file);
        if p.is_absolute() {
            let root = self.config.root.canonicalize().unwrap_or_else(|_| self.config.root.clone());
            for base in [&root, &self.config.root] {
                if let Ok(rel) = p.strip_prefix(base) {
                    return rel.to_string_lossy().into_owned();
                }
            }
        }
        file.to_string()
    }

    fn log_build(&self, argv: &[String], target: Option<&str>, report: &BuildReport) -> io::Result<()> {
        let n = self.log_seq.fetch_add(1, AtomicOrdering::SeqCst) + 1;
        let dir = self.config.root.join(LOG_DIR);
        fs::create_dir_all(&dir)?;
        let mut text = format!("$ {}", argv.join(" "));
        if let Some(t) = target {
            text.push(' ');
            text.push_str(t);
        }
        text.push_str(&format!(
            "\nexit: {}\ntimed_out: {}\nsuccess: {}\n\n",
            report.exit_code.map_or("none".to_string(), |c| c.to_string()),
            report.timed_out,
            report.success
        ));
        let mut bytes = text.into_bytes();
        bytes.extend_from_slice(&report.raw_output);
        fs::write(dir.join(format!("build-{n:06}.log")), bytes)
    }

    /// Library source files (everything under `<root>/<Lib>/`), relative to
    /// the root, in natural order.
    pub fn library_files(&self) -> io::Result<Vec<String>> {
        let mut out = Vec::new();
        let base = self.config.root.join(&self.config.lib_name);
        if base.is_dir() {
            collect_lean_files(&base, &self.config.root, &mut out)?;
        }
        out.sort_by(|a, b| natural_cmp(a, b));
        Ok(out)
    }

    pub fn census(&self) -> Result<UnsoundnessCensus, WorkspaceError> {
        let mut c = UnsoundnessCensus::default();
        for rel in self.library_files()? {
            let src = fs::read_to_string(self.config.root.join(&rel))?;
            c.add_file(&rel, &src);
        }
        Ok(c)
    }

    pub fn module_census(&self, id: &StatementId) -> Result<UnsoundnessCensus, WorkspaceError> {
        let src = self.read_module(id)?.unwrap_or_default();
        Ok(UnsoundnessCensus::of_source(&self.module_rel_path(id), &src))
    }
}

fn collect_lean_files(dir: &Path, root: &Path, out: &mut Vec<String>) -> io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_lean_files(&path, root, out)?;
        } else if path.extension().is_some_and(|e| e == "lean") {
            let rel = path.strip_prefix(root).unwrap_or(&path);
            out.push(rel.to_string_lossy().replace('\\', "/"));
        }
    }
    Ok(())
}

fn kill_tree(child: &mut std::process::Child) {
    #[cfg(unix)]
    {
        // the child leads its own process group
        let pid = child.id() as libc::pid_t;
        unsafe {
            libc::kill(-pid, libc::SIGKILL);
        }
    }
    let _ = child.kill();
}
