//! The per-statement compile-fix loop, faithfulness gate and axiom phase,
//! and the dependency-ordered run over a whole statement set.

pub mod code;
pub mod manifest;

use std::collections::{BTreeMap, BTreeSet};
use std::io;
use std::path::PathBuf;
use std::sync::mpsc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use manifest::{load_manifest, manifest_path, save_manifest, ManifestError, RunManifest, RunStatus};

use crate::canonical::{atomic_write, sha256_hex};
use crate::gateway::{AskError, Gateway, GatewayError, Message};
use crate::lean::decls::scan;
use crate::lean::{BuildReport, DiagSeverity, Diagnostic, UnsoundnessCensus, Workspace, WorkspaceError};
use crate::prompts::Prompts;
use crate::statement::{serialize_statement_set, topological_order, validate, Statement, StatementId, StatementKind, StatementSet};
use code::{assemble_module, extract_lean_code, has_axiom_suffix, stub_from_header};
use manifest::{CensusSummary, FinalBuild, SCHEMA_VERSION};

pub const STATEMENTS_REL_PATH: &str = ".merlean/statements.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    pub max_attempts: u32,
    pub faithfulness_enabled: bool,
    pub faithfulness_max_rejections: u32,
    pub axiom_phase_enabled: bool,
    pub axiom_max_attempts: u32,
    /// Dependency modules included verbatim in prompts (signatures of all
    /// transitive dependencies are always included).
    pub context_window_statements: usize,
    pub workers: usize,
    /// Statements whose main-loop code may introduce axioms.
    pub axiom_planned: Vec<StatementId>,
    /// Total calls per faithfulness verdict when replies do not parse.
    pub reprompt_budget: u32,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            max_attempts: 30,
            faithfulness_enabled: true,
            faithfulness_max_rejections: 3,
            axiom_phase_enabled: true,
            axiom_max_attempts: 10,
            context_window_statements: 10,
            workers: 1,
            axiom_planned: Vec::new(),
            reprompt_budget: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Faithfulness {
    NotRun,
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Main,
    Axiom,
    Stub,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosticCount {
    pub errors: usize,
    pub warnings: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttemptRecord {
    /// 1-based within its phase.
    pub attempt_index: u32,
    pub phase: Phase,
    pub code_hash: String,
    /// Strict build result of the module.
    pub build_success: bool,
    pub diagnostic_count: DiagnosticCount,
    /// `sorry` tokens and axiom-policy violations found by the census.
    pub policy_errors: usize,
    pub faithfulness: Faithfulness,
    pub wall_ms: u64,
}

impl AttemptRecord {
    pub fn clean(&self) -> bool {
        self.build_success && self.policy_errors == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaithfulnessVerdict {
    pub accepted: bool,
    pub rationale: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Proved,
    Axiomatized,
    Failed,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Proved => "proved",
            Outcome::Axiomatized => "axiomatized",
            Outcome::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatementResult {
    pub statement_id: StatementId,
    pub kind: StatementKind,
    pub outcome: Outcome,
    /// Main-loop attempts.
    pub attempts: Vec<AttemptRecord>,
    pub axiom_attempts: Vec<AttemptRecord>,
    pub stub_attempts: Vec<AttemptRecord>,
    pub faithfulness_rejections: u32,
    pub rejection_rationales: Vec<String>,
    /// Relative to the workspace root.
    pub final_code_path: String,
    pub final_code_hash: String,
    pub introduced_axioms: Vec<String>,
    /// Stub axiom left by a failed statement.
    pub stub_axiom: Option<String>,
    pub introduced_declarations: usize,
    pub total_wall_ms: u64,
}

impl StatementResult {
    /// Every build invocation made for this statement.
    pub fn compile_attempts(&self) -> usize {
        self.attempts.len() + self.axiom_attempts.len() + self.stub_attempts.len()
    }

    /// All axioms this statement's module declares.
    pub fn axioms(&self) -> impl Iterator<Item = &String> {
        self.introduced_axioms.iter().chain(self.stub_axiom.iter())
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("engine invariant violated: {0}")]
    Invariant(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

/// Result of [`Engine::compile_fix_loop`].
#[derive(Debug, Clone)]
pub struct LoopOutcome {
    pub accepted: bool,
    pub code: String,
    pub attempts: Vec<AttemptRecord>,
    pub rejections: u32,
    pub rationales: Vec<String>,
    pub last_diagnostics: Vec<Diagnostic>,
}

/// Result of [`Engine::axiom_phase`].
#[derive(Debug, Clone)]
pub struct AxiomOutcome {
    pub success: bool,
    pub attempts: Vec<AttemptRecord>,
    pub axioms: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub results: Vec<StatementResult>,
    pub census: UnsoundnessCensus,
    pub final_build: BuildReport,
    pub manifest_path: PathBuf,
    pub manifest: RunManifest,
}

impl RunResult {
    pub fn has_failures(&self) -> bool {
        self.results.iter().any(|r| r.outcome == Outcome::Failed) || !self.final_build.success
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub resume: bool,
    pub extraction_wall_ms: Option<u64>,
}

/// Prompt context shared by all attempts for one statement.
#[derive(Debug, Clone)]
pub struct StatementContext {
    pub imports: Vec<String>,
    pub dependencies: String,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum AxiomRule {
    Forbidden,
    Allowed,
    Required,
}

struct Checked {
    record: AttemptRecord,
    code: String,
    diagnostics: Vec<Diagnostic>,
    census: UnsoundnessCensus,
}

/// Parses the faithfulness marker grammar: a `VERDICT: ACCEPT|REJECT` line
/// followed by rationale lines.
pub fn parse_verdict(reply: &str) -> Result<FaithfulnessVerdict, String> {
    let mut lines = reply.lines().skip_while(|l| l.trim().is_empty());
    let first = lines.next().ok_or("empty reply")?.trim().trim_matches('*').trim();
    let verdict = first
        .strip_prefix("VERDICT:")
        .ok_or_else(|| format!("first line `{first}` is not a VERDICT line"))?
        .trim()
        .trim_matches('*')
        .trim();
    let accepted = match verdict.to_ascii_uppercase().as_str() {
        "ACCEPT" => true,
        "REJECT" => false,
        other => return Err(format!("unknown verdict `{other}`")),
    };
    let rationale = lines.collect::<Vec<_>>().join("\n").trim().to_string();
    let rationale = if rationale.is_empty() && !accepted { "no rationale given".to_string() } else { rationale };
    Ok(FaithfulnessVerdict { accepted, rationale })
}

fn format_diagnostics(diags: &[Diagnostic]) -> String {
    const LIMIT: usize = 20;
    if diags.is_empty() {
        return "(none)".to_string();
    }
    let mut s: Vec<String> = diags.iter().take(LIMIT).map(|d| d.to_string()).collect();
    if diags.len() > LIMIT {
        s.push(format!("... and {} more", diags.len() - LIMIT));
    }
    s.join("\n")
}

fn fenced(code: &str) -> String {
    format!("```lean\n{}\n```", code.trim_end())
}

pub struct Engine<'a> {
    pub workspace: &'a Workspace,
    pub gateway: &'a Gateway,
    pub config: &'a LoopConfig,
    pub prompts: &'a Prompts,
}

impl<'a> Engine<'a> {
    pub fn new(workspace: &'a Workspace, gateway: &'a Gateway, config: &'a LoopConfig, prompts: &'a Prompts) -> Self {
        Engine { workspace, gateway, config, prompts }
    }

    fn now(&self) -> u64 {
        self.gateway.clock().now_ms()
    }

    /// Imports and dependency excerpts for `stmt`.
    pub fn context(&self, stmt: &Statement, set: &StatementSet) -> io::Result<StatementContext> {
        let mut imports = Vec::new();
        if self.workspace.config().mathlib.is_some() {
            imports.push("Mathlib".to_string());
        }
        imports.extend(stmt.dependencies.iter().filter(|d| set.get(d).is_some()).map(|d| self.workspace.module_name(d)));

        // transitive dependencies, in set order
        let mut needed: BTreeSet<&StatementId> = BTreeSet::new();
        let mut stack: Vec<&StatementId> = stmt.dependencies.iter().collect();
        while let Some(id) = stack.pop() {
            if let Some(s) = set.get(id) {
                if needed.insert(id) {
                    stack.extend(s.dependencies.iter());
                }
            }
        }
        let mut sigs = String::new();
        for s in set.statements.iter().filter(|s| needed.contains(&s.id)) {
            let Some(src) = self.workspace.read_module(&s.id)? else { continue };
            sigs.push_str(&format!("-- {} ({})\n", s.id, self.workspace.module_name(&s.id)));
            for d in scan(&src).decls {
                sigs.push_str(&d.signature);
                sigs.push('\n');
            }
        }
        let direct: Vec<&StatementId> = stmt.dependencies.iter().filter(|d| set.get(d).is_some()).collect();
        let window = direct.len().saturating_sub(self.config.context_window_statements);
        let mut full = String::new();
        for id in &direct[window..] {
            if let Some(src) = self.workspace.read_module(id)? {
                let body: Vec<&str> = src.lines().filter(|l| !l.starts_with("import ")).collect();
                full.push_str(&format!("-- {}\n{}\n", self.workspace.module_name(id), body.join("\n").trim()));
            }
        }
        let dependencies = match (sigs.is_empty(), full.is_empty()) {
            (true, true) => "(none)".to_string(),
            _ => format!("Signatures:\n{}\nSource of direct dependencies:\n{}", sigs.trim_end(), full.trim_end()),
        };
        Ok(StatementContext { imports, dependencies })
    }

    fn initial_prompt(&self, stmt: &Statement, ctx: &StatementContext) -> String {
        let header: String = ctx.imports.iter().map(|m| format!("import {m}\n")).collect();
        self.prompts.render(
            "formalize/initial",
            &[
                ("id", stmt.id.as_str()),
                ("kind", stmt.kind.as_str()),
                ("module", &self.workspace.module_name(&stmt.id)),
                ("statement", &stmt.text),
                ("proof_sketch", stmt.proof_sketch.as_deref().unwrap_or("(none)")),
                ("dependencies", &ctx.dependencies),
                ("header", if header.is_empty() { "(no imports)" } else { header.trim_end() }),
            ],
        )
    }

    fn fix_prompt(&self, stmt: &Statement, attempt: u32, code: &str, diags: &[Diagnostic]) -> String {
        self.prompts.render(
            "formalize/fix",
            &[
                ("module", &self.workspace.module_name(&stmt.id)),
                ("attempt", &attempt.to_string()),
                ("diagnostics", &format_diagnostics(diags)),
                ("code", code.trim_end()),
            ],
        )
    }

    /// Writes, builds and census-checks one candidate module.
    fn try_code(
        &self,
        stmt: &Statement,
        ctx: &StatementContext,
        reply: &str,
        phase: Phase,
        index: u32,
        rule: AxiomRule,
        started: u64,
    ) -> Result<Checked, EngineError> {
        let code = assemble_module(&ctx.imports, &extract_lean_code(reply));
        self.check_written(stmt, code, phase, index, rule, started)
    }

    fn check_written(
        &self,
        stmt: &Statement,
        code: String,
        phase: Phase,
        index: u32,
        rule: AxiomRule,
        started: u64,
    ) -> Result<Checked, EngineError> {
        self.workspace.write_module(&stmt.id, &code)?;
        let report = self.workspace.build_module(&stmt.id)?;
        let file = self.workspace.module_rel_path(&stmt.id);
        let census = UnsoundnessCensus::of_source(&file, &code);
        let mut diagnostics = report.diagnostics.clone();
        let mut policy = Vec::new();
        for loc in &census.sorry_locations {
            policy.push(Diagnostic {
                severity: DiagSeverity::Error,
                file: file.clone(),
                line: loc.line,
                column: loc.column,
                message: "`sorry` is not allowed in accepted code".to_string(),
            });
        }
        for ax in &census.axiom_names {
            let message = match rule {
                AxiomRule::Forbidden => format!("axiom `{}` is not allowed here; prove the fact instead", ax.name),
                AxiomRule::Required if !has_axiom_suffix(&ax.name) => {
                    format!("axiom `{}` must be named with an `_ax` or `_aux` suffix", ax.name)
                }
                _ => continue,
            };
            policy.push(Diagnostic {
                severity: DiagSeverity::Error,
                file: file.clone(),
                line: ax.location.line,
                column: ax.location.column,
                message,
            });
        }
        if rule == AxiomRule::Required && census.axiom_names.is_empty() {
            policy.push(Diagnostic {
                severity: DiagSeverity::Error,
                file: file.clone(),
                line: 1,
                column: 1,
                message: "no `axiom` declaration introduced; state the unproved facts as axioms".to_string(),
            });
        }
        let record = AttemptRecord {
            attempt_index: index,
            phase,
            code_hash: sha256_hex(code.as_bytes()),
            build_success: report.success,
            diagnostic_count: DiagnosticCount { errors: report.errors().count(), warnings: report.warnings().count() },
            policy_errors: policy.len(),
            faithfulness: Faithfulness::NotRun,
            wall_ms: self.now().saturating_sub(started),
        };
        diagnostics.extend(policy);
        Ok(Checked { record, code, diagnostics, census })
    }

    /// Asks whether compiled `code` states what `stmt` says. Replies that
    /// never parse count as a rejection.
    pub fn check_faithfulness(&self, stmt: &Statement, code: &str, attempt: u32) -> Result<FaithfulnessVerdict, EngineError> {
        let messages = vec![
            Message::system(self.prompts.render("faithfulness/system", &[])),
            Message::user(self.prompts.render(
                "faithfulness/check",
                &[("id", stmt.id.as_str()), ("kind", stmt.kind.as_str()), ("statement", &stmt.text), ("code", code.trim_end())],
            )),
        ];
        let tag = format!("faithfulness/{}/attempt{attempt}", stmt.id);
        match self.gateway.ask_parsed(
            &tag,
            messages,
            self.config.reprompt_budget,
            |e| self.prompts.render("faithfulness/reprompt", &[("error", e)]),
            parse_verdict,
        ) {
            Ok(v) => Ok(v),
            Err(AskError::Unparseable { .. }) => {
                Ok(FaithfulnessVerdict { accepted: false, rationale: "unparseable verdict".to_string() })
            }
            Err(AskError::Gateway(e)) => Err(e.into()),
        }
    }

    /// Generate, build and repair until a strict, sorry-free build (and an
    /// accepting faithfulness verdict, when enabled) or until the attempt or
    /// rejection budget runs out.
    pub fn compile_fix_loop(&self, stmt: &Statement, ctx: &StatementContext) -> Result<LoopOutcome, EngineError> {
        let rule =
            if self.config.axiom_planned.contains(&stmt.id) { AxiomRule::Allowed } else { AxiomRule::Forbidden };
        let system = Message::system(self.prompts.render("formalize/system", &[]));
        let initial = Message::user(self.initial_prompt(stmt, ctx));
        let mut out = LoopOutcome {
            accepted: false,
            code: String::new(),
            attempts: Vec::new(),
            rejections: 0,
            rationales: Vec::new(),
            last_diagnostics: Vec::new(),
        };
        for attempt in 1..=self.config.max_attempts.max(1) {
            let started = self.now();
            let mut messages = vec![system.clone(), initial.clone()];
            if attempt > 1 {
                messages.push(Message::assistant(fenced(&out.code)));
                messages.push(Message::user(self.fix_prompt(stmt, attempt, &out.code, &out.last_diagnostics)));
            }
            let tag = format!("formalize/{}/attempt{attempt}", stmt.id);
            let reply = self.gateway.complete(&self.gateway.request(tag, messages))?.content;
            let mut checked = self.try_code(stmt, ctx, &reply, Phase::Main, attempt, rule, started)?;
            out.code = checked.code.clone();
            out.last_diagnostics = checked.diagnostics.clone();
            let clean = checked.record.clean();
            if clean && !self.config.faithfulness_enabled {
                out.attempts.push(checked.record);
                out.accepted = true;
                return Ok(out);
            }
            if clean {
                let verdict = self.check_faithfulness(stmt, &checked.code, attempt)?;
                checked.record.wall_ms = self.now().saturating_sub(started);
                if verdict.accepted {
                    checked.record.faithfulness = Faithfulness::Accepted;
                    out.attempts.push(checked.record);
                    out.accepted = true;
                    return Ok(out);
                }
                checked.record.faithfulness = Faithfulness::Rejected;
                out.rejections += 1;
                out.rationales.push(verdict.rationale.clone());
                out.last_diagnostics = vec![Diagnostic {
                    severity: DiagSeverity::Error,
                    file: self.workspace.module_rel_path(&stmt.id),
                    line: 1,
                    column: 1,
                    message: format!("faithfulness: {}", verdict.rationale),
                }];
                out.attempts.push(checked.record);
                if out.rejections >= self.config.faithfulness_max_rejections {
                    return Ok(out);
                }
                continue;
            }
            out.attempts.push(checked.record);
        }
        Ok(out)
    }

    /// Bounded loop asking for a module whose unproved facts are explicit,
    /// suffix-named axioms.
    pub fn axiom_phase(
        &self,
        stmt: &Statement,
        ctx: &StatementContext,
        last_code: &str,
        last_diagnostics: &[Diagnostic],
    ) -> Result<AxiomOutcome, EngineError> {
        let system = Message::system(self.prompts.render("axiom/system", &[]));
        let first = Message::user(self.prompts.render(
            "axiom/axiomatize",
            &[
                ("id", stmt.id.as_str()),
                ("kind", stmt.kind.as_str()),
                ("statement", &stmt.text),
                ("code", last_code.trim_end()),
                ("diagnostics", &format_diagnostics(last_diagnostics)),
            ],
        ));
        let mut out = AxiomOutcome { success: false, attempts: Vec::new(), axioms: Vec::new() };
        let mut code = String::new();
        let mut diags: Vec<Diagnostic> = Vec::new();
        for k in 1..=self.config.axiom_max_attempts {
            let started = self.now();
            let mut messages = vec![system.clone(), first.clone()];
            if k > 1 {
                messages.push(Message::assistant(fenced(&code)));
                messages.push(Message::user(self.fix_prompt(stmt, k, &code, &diags)));
            }
            let tag = format!("formalize/{}/axiom{k}", stmt.id);
            let reply = self.gateway.complete(&self.gateway.request(tag, messages))?.content;
            let checked = self.try_code(stmt, ctx, &reply, Phase::Axiom, k, AxiomRule::Required, started)?;
            code = checked.code;
            diags = checked.diagnostics;
            let clean = checked.record.clean();
            out.attempts.push(checked.record);
            if clean {
                out.success = true;
                out.axioms = checked.census.axiom_names.iter().map(|a| a.name.clone()).collect();
                return Ok(out);
            }
        }
        Ok(out)
    }

    /// Replaces the module with a single stub axiom: the last principal
    /// declaration's header when that builds, else `<Id>_stub_ax : Prop`.
    fn write_stub(&self, stmt: &Statement, ctx: &StatementContext, last_code: &str) -> Result<(Vec<AttemptRecord>, String), EngineError> {
        let doc = format!("/-- Placeholder axiom: statement {} was not formalized. -/", stmt.id);
        let mut candidates = Vec::new();
        if let Some((_, axiom)) = stub_from_header(last_code) {
            candidates.push(axiom);
        }
        candidates.push(format!("axiom {}_stub_ax : Prop", stmt.id));
        let mut records = Vec::new();
        let mut name = format!("{}_stub_ax", stmt.id);
        for (i, axiom) in candidates.iter().enumerate() {
            let started = self.now();
            let code = assemble_module(&ctx.imports, &format!("{doc}\n{axiom}"));
            let checked = self.check_written(stmt, code, Phase::Stub, i as u32 + 1, AxiomRule::Allowed, started)?;
            if let Some(a) = checked.census.axiom_names.first() {
                name = a.name.clone();
            }
            let clean = checked.record.clean();
            records.push(checked.record);
            if clean {
                break;
            }
        }
        Ok((records, name))
    }

    /// Loop, faithfulness gate and axiom phase for one statement.
    pub fn formalize_statement(&self, stmt: &Statement, set: &StatementSet) -> Result<StatementResult, EngineError> {
        let started = self.now();
        let ctx = self.context(stmt, set)?;
        let lo = self.compile_fix_loop(stmt, &ctx)?;
        let mut result = StatementResult {
            statement_id: stmt.id.clone(),
            kind: stmt.kind,
            outcome: Outcome::Failed,
            attempts: lo.attempts.clone(),
            axiom_attempts: Vec::new(),
            stub_attempts: Vec::new(),
            faithfulness_rejections: lo.rejections,
            rejection_rationales: lo.rationales.clone(),
            final_code_path: self.workspace.module_rel_path(&stmt.id),
            final_code_hash: String::new(),
            introduced_axioms: Vec::new(),
            stub_axiom: None,
            introduced_declarations: 0,
            total_wall_ms: 0,
        };
        if lo.accepted {
            result.outcome = Outcome::Proved;
        } else {
            let mut done = false;
            if self.config.axiom_phase_enabled {
                let ap = self.axiom_phase(stmt, &ctx, &lo.code, &lo.last_diagnostics)?;
                result.axiom_attempts = ap.attempts;
                if ap.success {
                    result.outcome = Outcome::Axiomatized;
                    done = true;
                }
            }
            if !done {
                tracing::warn!(id = %stmt.id, "statement failed; leaving a stub axiom");
                let (records, name) = self.write_stub(stmt, &ctx, &lo.code)?;
                result.stub_attempts = records;
                result.stub_axiom = Some(name);
            }
        }
        let module = self.workspace.module_census(&stmt.id)?;
        if result.outcome != Outcome::Failed {
            result.introduced_axioms = module.axiom_names.iter().map(|a| a.name.clone()).collect();
        }
        result.introduced_declarations = module.total_declarations();
        let src = self.workspace.read_module(&stmt.id)?.unwrap_or_default();
        result.final_code_hash = sha256_hex(src.as_bytes());
        result.total_wall_ms = self.now().saturating_sub(started);
        self.check_result(&result)?;
        tracing::info!(id = %stmt.id, outcome = result.outcome.as_str(), builds = result.compile_attempts(), "statement done");
        Ok(result)
    }

    fn check_result(&self, r: &StatementResult) -> Result<(), EngineError> {
        let c = self.config;
        let fail = |m: String| Err(EngineError::Invariant(format!("{}: {m}", r.statement_id)));
        if r.attempts.len() > c.max_attempts.max(1) as usize {
            return fail(format!("{} main-loop attempts exceed {}", r.attempts.len(), c.max_attempts));
        }
        if r.axiom_attempts.len() > c.axiom_max_attempts as usize {
            return fail(format!("{} axiom-phase attempts exceed {}", r.axiom_attempts.len(), c.axiom_max_attempts));
        }
        match r.outcome {
            Outcome::Proved => {
                let last = r.attempts.last().filter(|a| a.clean() && a.faithfulness != Faithfulness::Rejected);
                if last.is_none() {
                    return fail("proved without a clean accepted attempt".into());
                }
                if !r.introduced_axioms.is_empty() && !c.axiom_planned.contains(&r.statement_id) {
                    return fail("proved with axioms but not axiom-planned".into());
                }
            }
            Outcome::Axiomatized => {
                if r.introduced_axioms.is_empty() || !r.axiom_attempts.last().is_some_and(AttemptRecord::clean) {
                    return fail("axiomatized without a clean axiom-phase build".into());
                }
            }
            Outcome::Failed => {}
        }
        Ok(())
    }

    /// Formalizes every statement in dependency order, checkpointing the
    /// manifest after each, then runs a full strict build and the census.
    pub fn formalize_all(&self, set: &StatementSet, options: RunOptions) -> Result<RunResult, EngineError> {
        let report = validate(set);
        if !report.ok {
            return Err(EngineError::Invalid(format!("statement set does not validate:\n{report}")));
        }
        let order = topological_order(set).map_err(|e| EngineError::Invalid(e.to_string()))?;
        let root = self.workspace.root().to_path_buf();
        atomic_write(&root.join(STATEMENTS_REL_PATH), &serialize_statement_set(set))?;
        let mpath = manifest_path(&root);
        let ws_cfg = self.workspace.config();

        let mut manifest = match options.resume && mpath.exists() {
            true => {
                let m = load_manifest(&mpath)?;
                if m.source_fingerprint != set.source_fingerprint {
                    return Err(EngineError::Invalid(
                        "manifest belongs to a different statement set; rerun without --resume".to_string(),
                    ));
                }
                m
            }
            false => RunManifest {
                schema_version: SCHEMA_VERSION,
                status: RunStatus::Running,
                lib_name: ws_cfg.lib_name.clone(),
                toolchain: ws_cfg.toolchain.clone(),
                source_fingerprint: set.source_fingerprint.clone(),
                loop_config: self.config.clone(),
                order: order.clone(),
                results: Vec::new(),
                warnings: Vec::new(),
                extraction_wall_ms: None,
                formalization_wall_ms: 0,
                final_build: None,
                census: None,
            },
        };
        manifest.status = RunStatus::Running;
        manifest.order = order.clone();
        if options.extraction_wall_ms.is_some() {
            manifest.extraction_wall_ms = options.extraction_wall_ms;
        }
        // keep only finished results whose module is still what they produced
        let mut kept = Vec::new();
        for r in std::mem::take(&mut manifest.results) {
            let current = self.workspace.read_module(&r.statement_id)?.map(|s| sha256_hex(s.as_bytes()));
            if set.get(&r.statement_id).is_some() && current.as_deref() == Some(r.final_code_hash.as_str()) {
                kept.push(r);
            } else {
                tracing::info!(id = %r.statement_id, "module changed since checkpoint; redoing");
            }
        }
        manifest.results = kept;
        save_manifest(&mpath, &manifest)?;

        let mut done: BTreeMap<StatementId, Outcome> =
            manifest.results.iter().map(|r| (r.statement_id.clone(), r.outcome)).collect();
        let mut pending: Vec<StatementId> = order.iter().filter(|id| !done.contains_key(*id)).cloned().collect();
        let workers = self.config.workers.max(1);

        std::thread::scope(|scope| -> Result<(), EngineError> {
            let (tx, rx) = mpsc::channel::<(StatementId, Result<StatementResult, EngineError>)>();
            let mut running: BTreeSet<StatementId> = BTreeSet::new();
            let mut first_error: Option<EngineError> = None;
            loop {
                if first_error.is_none() {
                    let mut i = 0;
                    while running.len() < workers && i < pending.len() {
                        let stmt = set.get(&pending[i]).expect("pending ids come from the set");
                        let ready = stmt.dependencies.iter().all(|d| done.contains_key(d) || set.get(d).is_none());
                        if !ready {
                            i += 1;
                            continue;
                        }
                        for d in &stmt.dependencies {
                            if done.get(d) == Some(&Outcome::Failed) {
                                manifest.warnings.push(format!("{} depends on failed {d} (stub axiom)", stmt.id));
                            }
                        }
                        let id = pending.remove(i);
                        running.insert(id.clone());
                        let tx = tx.clone();
                        scope.spawn(move || {
                            let r = self.formalize_statement(stmt, set);
                            let _ = tx.send((id, r));
                        });
                    }
                }
                if running.is_empty() {
                    break;
                }
                let (id, r) = rx.recv().expect("workers hold a sender");
                running.remove(&id);
                match r {
                    Ok(result) => {
                        done.insert(id, result.outcome);
                        manifest.results.push(result);
                        manifest.formalization_wall_ms = manifest.results.iter().map(|r| r.total_wall_ms).sum();
                        save_manifest(&mpath, &manifest)?;
                    }
                    Err(e) => {
                        first_error.get_or_insert(e);
                    }
                }
            }
            first_error.map_or(Ok(()), Err)
        })?;

        let final_build = self.workspace.build()?;
        let census = self.workspace.census()?;
        if !final_build.success {
            manifest.warnings.push(format!(
                "final strict build failed: {} error(s), {} warning(s)",
                final_build.errors().count(),
                final_build.warnings().count()
            ));
        }
        if census.sorry_count > 0 {
            manifest.warnings.push(format!("census found {} sorry token(s)", census.sorry_count));
        }
        let accounted: BTreeSet<&String> = manifest.results.iter().flat_map(StatementResult::axioms).collect();
        let found: BTreeSet<&String> = census.axiom_names.iter().map(|a| &a.name).collect();
        let unaccounted: Vec<&str> = found.difference(&accounted).map(|s| s.as_str()).collect();
        if !unaccounted.is_empty() {
            manifest.warnings.push(format!("unaccounted axioms: {}", unaccounted.join(", ")));
        }
        manifest.final_build = Some(FinalBuild {
            success: final_build.success,
            errors: final_build.errors().count(),
            warnings: final_build.warnings().count(),
        });
        manifest.census = Some(CensusSummary::from(&census));
        manifest.status = RunStatus::Complete;
        save_manifest(&mpath, &manifest)?;
        Ok(RunResult { results: manifest.results.clone(), census, final_build, manifest_path: mpath, manifest })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_grammar() {
        assert_eq!(parse_verdict("VERDICT: ACCEPT").unwrap(), FaithfulnessVerdict { accepted: true, rationale: String::new() });
        let v = parse_verdict("\nVERDICT: REJECT\nproves the trivial case only\n").unwrap();
        assert_eq!(v, FaithfulnessVerdict { accepted: false, rationale: "proves the trivial case only".into() });
        assert_eq!(parse_verdict("**VERDICT: REJECT**").unwrap().rationale, "no rationale given");
        assert!(parse_verdict("looks fine to me").is_err());
        assert!(parse_verdict("VERDICT: MAYBE").is_err());
        assert!(parse_verdict("").is_err());
    }

    #[test]
    fn loop_config_defaults() {
        let c = LoopConfig::default();
        assert_eq!((c.max_attempts, c.faithfulness_max_rejections, c.axiom_max_attempts, c.workers), (30, 3, 10, 1));
        assert!(c.faithfulness_enabled && c.axiom_phase_enabled);
    }
}

#[cfg(test)]
mod scenarios;
