//! Command-line entry points. Exit codes: 0 success, 1 finished with failed
//! statements or audit findings, 2 could not run.

use std::ffi::OsString;
use std::fs;
use std::io::IsTerminal;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::canonical::{atomic_write, to_canonical_json};
use crate::config::RunConfig;
use crate::engine::{load_manifest, manifest_path, Engine, RunOptions, STATEMENTS_REL_PATH};
use crate::extract::{Extractor, SourceDocument};
use crate::gateway::{audit_transcript, AuditFinding, AuditReport, Gateway, Transcript};
use crate::informal::{build_decl_graph, emit::emit_all, informalize_graph, parse_lean_files};
use crate::lean::{init_workspace, Workspace};
use crate::prompts::Prompts;
use crate::report::{render_report, Report, ReportFormat};
use crate::statement::{parse_statement_set, serialize_statement_set, StatementSet};

#[derive(Debug, Parser)]
#[command(name = "merlean", version, about = "LaTeX to Lean formalization pipeline")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// live, scripted:<file>, record:<path> or replay:<path>.
    #[arg(long, global = true)]
    pub backend: Option<String>,
    /// Also save every backend call of this invocation as a transcript.
    #[arg(long, global = true)]
    pub transcript: Option<PathBuf>,
    /// Repeat for more log output on stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract statements from a LaTeX source.
    Extract {
        tex: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        passes: Option<u32>,
    },
    /// Formalize a statement set into a Lean workspace.
    Formalize {
        statements: PathBuf,
        #[arg(long)]
        workspace: Option<PathBuf>,
        #[arg(long)]
        max_attempts: Option<u32>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        resume: bool,
    },
    /// Write the blueprint, narrative and graph for a workspace.
    Informalize {
        workspace: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// LaTeX source checked by the isolation audit.
        #[arg(long)]
        source: Option<PathBuf>,
    },
    /// Summary tables for a workspace.
    Report {
        workspace: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Text)]
        format: FormatArg,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Extract, formalize, informalize and report.
    Run {
        tex: Option<PathBuf>,
        #[arg(long)]
        workspace: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        resume: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Text,
    Json,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Text => ReportFormat::Text,
            FormatArg::Json => ReportFormat::Json,
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    init_logging(cli.verbose);
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_env("MERLEAN_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .try_init();
}

/// Stage context shared by the subcommands.
pub struct Session {
    pub config: RunConfig,
    pub gateway: Gateway,
    pub prompts: Prompts,
}

impl Session {
    pub fn new(config: RunConfig) -> Result<Session> {
        let prompts = match &config.prompts_dir {
            Some(dir) => Prompts::with_overrides(dir).with_context(|| format!("reading prompts from {}", dir.display()))?,
            None => Prompts::builtin(),
        };
        let gateway = Gateway::from_config(&config.backend).context("setting up the backend")?;
        Ok(Session { config, gateway, prompts })
    }

    /// Extracts statements; returns the set and the extraction wall time.
    pub fn extract(&self, tex: &Path) -> Result<(StatementSet, SourceDocument, u64)> {
        let doc = SourceDocument::load(tex)?;
        let clock = self.gateway.clock();
        let start = clock.now_ms();
        let set = Extractor::new(&self.gateway, &self.config.extraction, &self.prompts).extract(&doc)?;
        Ok((set, doc, clock.now_ms() - start))
    }

    pub fn workspace(&self, root: Option<&Path>) -> Result<Workspace> {
        let mut cfg = self.config.workspace.clone();
        if let Some(root) = root {
            cfg.root = root.to_path_buf();
        }
        Ok(init_workspace(cfg)?)
    }

    /// Runs the engine and prints a summary; returns true when every
    /// statement succeeded and the final build is clean.
    pub fn formalize(&self, ws: &Workspace, set: &StatementSet, options: RunOptions) -> Result<bool> {
        let engine = Engine::new(ws, &self.gateway, &self.config.formalization, &self.prompts);
        let run = engine.formalize_all(set, options)?;
        for r in &run.results {
            eprintln!("{} {} ({} builds)", r.statement_id, r.outcome.as_str(), r.compile_attempts());
        }
        for w in &run.manifest.warnings {
            eprintln!("warning: {w}");
        }
        Ok(!run.has_failures())
    }

    /// Writes blueprint, narrative, graph and the isolation audit to
    /// `out_dir`; returns true when the audit is clean.
    pub fn informalize(&self, ws: &Workspace, out_dir: &Path, source: Option<&SourceDocument>) -> Result<bool> {
        let lib = parse_lean_files(ws)?;
        for skip in &lib.skipped {
            tracing::warn!(?skip, "skipped construct");
        }
        // the engine's final build decides, when there was one
        let recorded = load_manifest(&manifest_path(ws.root())).ok().and_then(|m| m.final_build);
        let verified = match recorded {
            Some(b) => b.success,
            None => ws.build()?.success,
        };
        let graph = build_decl_graph(lib.decls);
        let first_call = self.gateway.call_count();
        let outcome = informalize_graph(&graph, &self.gateway, &self.prompts, self.config.informalize_reprompt_budget, verified)?;
        for w in &outcome.warnings {
            eprintln!("warning: {w}");
        }
        fs::create_dir_all(out_dir)?;
        emit_all(&graph, &outcome.nodes, out_dir)?;

        let mut forbidden = Vec::new();
        let statements = ws.root().join(STATEMENTS_REL_PATH);
        if statements.exists() {
            let set = parse_statement_set(&fs::read(&statements)?)?;
            for s in set.statements {
                forbidden.push(s.text);
                forbidden.extend(s.proof_sketch);
            }
        }
        if let Some(doc) = source {
            forbidden.extend(doc.paragraphs());
        }
        let session = self.gateway.transcript();
        let mut calls = Transcript::new();
        for r in session.records().iter().skip(first_call) {
            calls.push(r.clone());
        }
        let audit = audit_transcript(&calls, &forbidden);
        write_audit(out_dir, &calls, forbidden.len(), &audit)?;
        for f in &audit.findings {
            eprintln!(
                "audit: informalization call {} message {} contains forbidden text {}",
                f.call_index, f.message_index, f.forbidden_index
            );
        }
        Ok(audit.is_clean())
    }
}

#[derive(Serialize)]
struct AuditFile<'a> {
    audited_calls: usize,
    forbidden_texts: usize,
    clean: bool,
    findings: &'a [AuditFinding],
}

fn write_audit(out_dir: &Path, calls: &Transcript, forbidden: usize, audit: &AuditReport) -> Result<()> {
    let doc = AuditFile { audited_calls: calls.len(), forbidden_texts: forbidden, clean: audit.is_clean(), findings: &audit.findings };
    atomic_write(&out_dir.join("isolation_audit.json"), &to_canonical_json(&doc)?)?;
    Ok(())
}

/// Report over the manifest in `root`; an empty report when there is none.
pub fn workspace_report(root: &Path) -> Result<Report> {
    if !root.is_dir() {
        bail!("workspace {} does not exist", root.display());
    }
    let path = manifest_path(root);
    if !path.exists() {
        return Ok(Report::from_runs(&[])?);
    }
    let m = load_manifest(&path)?;
    Ok(Report::from_runs(&[(m.lib_name.clone(), &m)])?)
}

fn write_reports(root: &Path, out_dir: &Path) -> Result<()> {
    let report = workspace_report(root)?;
    atomic_write(&out_dir.join("report.txt"), &render_report(&report, ReportFormat::Text))?;
    atomic_write(&out_dir.join("report.json"), &render_report(&report, ReportFormat::Json))?;
    Ok(())
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(spec) = &cli.backend {
        cfg.apply_backend_spec(spec)?;
    }
    Ok(cfg)
}

fn exit_code(ok: bool) -> i32 {
    if ok {
        0
    } else {
        1
    }
}

pub fn execute(cli: Cli) -> Result<i32> {
    let mut config = load_config(&cli)?;
    match &cli.command {
        Command::Report { workspace, format, output } => {
            let bytes = render_report(&workspace_report(workspace)?, (*format).into());
            match output {
                Some(path) => atomic_write(path, &bytes)?,
                None => {
                    use std::io::Write;
                    std::io::stdout().write_all(&bytes)?;
                }
            }
            return Ok(0);
        }
        Command::Extract { passes: Some(p), .. } => config.extraction.passes = *p,
        Command::Formalize { max_attempts, workers, .. } => {
            if let Some(n) = max_attempts {
                config.formalization.max_attempts = *n;
            }
            if let Some(k) = workers {
                config.formalization.workers = *k;
            }
        }
        _ => {}
    }
    let session = Session::new(config)?;
    let result = run_stages(&session, cli.command);
    if let Some(path) = &cli.transcript {
        session.gateway.transcript().save(path).with_context(|| format!("saving transcript to {}", path.display()))?;
    }
    result
}

fn run_stages(session: &Session, command: Command) -> Result<i32> {
    let config = &session.config;
    match command {
        Command::Extract { tex, output, .. } => {
            let (set, _, _) = session.extract(&tex)?;
            atomic_write(&output, &serialize_statement_set(&set))?;
            eprintln!("extracted {} statements to {}", set.len(), output.display());
            Ok(0)
        }
        Command::Formalize { statements, workspace, resume, .. } => {
            let bytes = fs::read(&statements).with_context(|| format!("reading {}", statements.display()))?;
            let set = parse_statement_set(&bytes)?;
            let ws = session.workspace(workspace.as_deref())?;
            let ok = session.formalize(&ws, &set, RunOptions { resume, extraction_wall_ms: None })?;
            Ok(exit_code(ok))
        }
        Command::Informalize { workspace, output, source } => {
            let out = output.unwrap_or_else(|| config.output_dir.clone());
            let source = source.or_else(|| config.paper.clone());
            let ws = session.workspace(Some(&workspace))?;
            let doc = source.as_deref().map(SourceDocument::load).transpose()?;
            let clean = session.informalize(&ws, &out, doc.as_ref())?;
            Ok(exit_code(clean))
        }
        Command::Run { tex, workspace, output, resume } => {
            let Some(tex) = tex.or_else(|| config.paper.clone()) else {
                bail!("no LaTeX source given on the command line or in the config");
            };
            let out = output.unwrap_or_else(|| config.output_dir.clone());
            fs::create_dir_all(&out)?;
            let (set, doc, extraction_ms) = session.extract(&tex)?;
            atomic_write(&out.join("statements.json"), &serialize_statement_set(&set))?;
            let ws = session.workspace(workspace.as_deref())?;
            let formalized =
                session.formalize(&ws, &set, RunOptions { resume, extraction_wall_ms: Some(extraction_ms) })?;
            let clean = session.informalize(&ws, &out, Some(&doc))?;
            write_reports(ws.root(), &out)?;
            Ok(exit_code(formalized && clean))
        }
        Command::Report { .. } => unreachable!("handled without a backend"),
    }
}
