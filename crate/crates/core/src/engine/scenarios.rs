//! Scripted-backend scenarios for the engine, built with the offline Lake
//! stand-in.

use super::*;
use crate::gateway::ChatResponse;
use crate::lean::{init_workspace, WorkspaceConfig};

pub(crate) fn standin_command() -> Vec<String> {
    vec![
        "python3".into(),
        concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/lake_standin.py").into(),
        "build".into(),
    ]
}

fn workspace(dir: &std::path::Path) -> Workspace {
    init_workspace(WorkspaceConfig {
        root: dir.join("ws"),
        mathlib: None,
        build_command: standin_command(),
        ..WorkspaceConfig::default()
    })
    .unwrap()
}

fn lean(code: &str) -> ChatResponse {
    ChatResponse::text(format!("```lean\n{code}\n```"))
}

fn clean() -> ChatResponse {
    lean("theorem thm_one : 1 + 1 = 2 := rfl")
}

fn broken(n: usize) -> ChatResponse {
    lean(&format!("theorem thm_one : 1 + 1 = 2 := by\n  simp_all --! error unsolved goals (try {n})"))
}

fn accept() -> ChatResponse {
    ChatResponse::text("VERDICT: ACCEPT\nmatches the statement")
}

fn reject(why: &str) -> ChatResponse {
    ChatResponse::text(format!("VERDICT: REJECT\n{why}"))
}

fn axiom_ok() -> ChatResponse {
    lean("axiom widget_main_ax : ∀ n : Nat, n + 0 = n\n\ntheorem widget_main : ∀ n : Nat, n + 0 = n := widget_main_ax")
}

fn thm() -> Statement {
    Statement::new("Thm_1", StatementKind::Theorem, "One plus one is two.", &[]).unwrap()
}

fn single(stmt: Statement) -> StatementSet {
    StatementSet::new("fp", vec![stmt])
}

struct Rig {
    _dir: tempfile::TempDir,
    ws: Workspace,
    prompts: Prompts,
}

impl Rig {
    fn new() -> Rig {
        let dir = tempfile::tempdir().unwrap();
        let ws = workspace(dir.path());
        Rig { _dir: dir, ws, prompts: Prompts::builtin() }
    }

    fn run(&self, cfg: &LoopConfig, replies: Vec<ChatResponse>, stmt: Statement) -> (StatementResult, Gateway) {
        let gw = Gateway::scripted(replies);
        let set = single(stmt.clone());
        let r = Engine::new(&self.ws, &gw, cfg, &self.prompts).formalize_statement(&stmt, &set).unwrap();
        (r, gw)
    }
}

fn tags(gw: &Gateway) -> Vec<String> {
    gw.transcript().records().iter().map(|r| r.tag.clone()).collect()
}

#[test]
fn immediate_success() {
    let rig = Rig::new();
    let (r, gw) = rig.run(&LoopConfig::default(), vec![clean(), accept()], thm());
    assert_eq!(r.outcome, Outcome::Proved);
    assert_eq!(r.attempts.len(), 1);
    assert_eq!(r.attempts[0].faithfulness, Faithfulness::Accepted);
    assert_eq!(r.introduced_declarations, 1);
    assert!(r.introduced_axioms.is_empty());
    assert_eq!(tags(&gw), ["formalize/Thm_1/attempt1", "faithfulness/Thm_1/attempt1"]);
    let module = rig.ws.read_module(&thm().id).unwrap().unwrap();
    assert_eq!(module, "theorem thm_one : 1 + 1 = 2 := rfl\n");
}

#[test]
fn four_broken_then_clean() {
    let rig = Rig::new();
    let mut replies: Vec<_> = (1..=4).map(broken).collect();
    replies.extend([clean(), accept()]);
    let (r, gw) = rig.run(&LoopConfig::default(), replies, thm());
    assert_eq!(r.outcome, Outcome::Proved);
    assert_eq!(r.attempts.len(), 5);
    assert!(r.attempts[..4].iter().all(|a| !a.build_success && a.faithfulness == Faithfulness::NotRun));
    assert!(r.attempts[4].build_success);
    assert_eq!(r.attempts.iter().map(|a| a.attempt_index).collect::<Vec<_>>(), [1, 2, 3, 4, 5]);

    // every fix prompt carries the previous code and its diagnostics
    let records = gw.transcript().records().to_vec();
    let fix = &records[1].request.messages;
    assert_eq!(fix.len(), 4);
    assert!(fix[2].content.contains("(try 1)"));
    assert!(fix[3].content.contains("unsolved goals (try 1)"));
    assert!(fix[3].content.contains("Merlean/Statements/Thm_1.lean:2:"));

    // build logs agree with the records
    let logs = std::fs::read_dir(rig.ws.root().join(".merlean/logs")).unwrap().count();
    assert_eq!(logs, 5);
}

#[test]
fn thirty_failures_then_axiom_phase() {
    let rig = Rig::new();
    let mut replies: Vec<_> = (1..=30).map(broken).collect();
    replies.push(axiom_ok());
    let (r, gw) = rig.run(&LoopConfig::default(), replies, thm());
    assert_eq!(r.attempts.len(), 30);
    assert!(r.attempts.iter().all(|a| !a.build_success));
    assert_eq!(r.outcome, Outcome::Axiomatized);
    assert_eq!(r.axiom_attempts.len(), 1);
    assert_eq!(r.introduced_axioms, ["widget_main_ax"]);
    assert_eq!(r.compile_attempts(), 31);
    assert_eq!(tags(&gw).last().unwrap(), "formalize/Thm_1/axiom1");
}

#[test]
fn faithfulness_verdicts() {
    let rig = Rig::new();
    let gw = Gateway::scripted(vec![
        accept(),
        reject("proves the trivial case only"),
        ChatResponse::text("garbage"),
        ChatResponse::text("still garbage"),
        ChatResponse::text("VERDICT maybe"),
    ]);
    let cfg = LoopConfig::default();
    let e = Engine::new(&rig.ws, &gw, &cfg, &rig.prompts);
    let v = e.check_faithfulness(&thm(), "theorem x : True := trivial", 1).unwrap();
    assert!(v.accepted);
    let v = e.check_faithfulness(&thm(), "theorem x : True := trivial", 2).unwrap();
    assert_eq!(v, FaithfulnessVerdict { accepted: false, rationale: "proves the trivial case only".into() });
    let v = e.check_faithfulness(&thm(), "theorem x : True := trivial", 3).unwrap();
    assert_eq!(v, FaithfulnessVerdict { accepted: false, rationale: "unparseable verdict".into() });
    assert_eq!(gw.call_count(), 5);
    assert_eq!(
        &tags(&gw)[2..],
        ["faithfulness/Thm_1/attempt3", "faithfulness/Thm_1/attempt3/retry1", "faithfulness/Thm_1/attempt3/retry2"]
    );
}

#[test]
fn two_rejections_then_accept() {
    let rig = Rig::new();
    let replies = vec![clean(), reject("too weak"), clean(), reject("still too weak"), clean(), accept()];
    let (r, gw) = rig.run(&LoopConfig::default(), replies, thm());
    assert_eq!(r.outcome, Outcome::Proved);
    assert_eq!(r.faithfulness_rejections, 2);
    assert_eq!(r.rejection_rationales, ["too weak", "still too weak"]);
    // each rejection costs one rebuild, nothing more
    assert_eq!(r.attempts.len(), 3);
    let f: Vec<_> = r.attempts.iter().map(|a| a.faithfulness).collect();
    assert_eq!(f, [Faithfulness::Rejected, Faithfulness::Rejected, Faithfulness::Accepted]);
    // the rejection reaches the fix prompt as a pseudo-diagnostic
    let records = gw.transcript().records().to_vec();
    let fix = &records[2].request.messages[3].content;
    assert!(fix.contains("Merlean/Statements/Thm_1.lean:1:1: error: faithfulness: too weak"), "{fix}");
}

#[test]
fn rejection_budget_leads_to_axiom_phase() {
    let rig = Rig::new();
    let mut replies = Vec::new();
    for why in ["a", "b", "c"] {
        replies.extend([clean(), reject(why)]);
    }
    replies.push(axiom_ok());
    let (r, _) = rig.run(&LoopConfig::default(), replies, thm());
    assert_eq!(r.faithfulness_rejections, 3);
    assert_eq!(r.attempts.len(), 3);
    assert_eq!(r.outcome, Outcome::Axiomatized);
    assert_eq!(r.introduced_axioms, ["widget_main_ax"]);
}

#[test]
fn failing_axiom_phase_leaves_header_stub() {
    let rig = Rig::new();
    let cfg = LoopConfig { max_attempts: 2, ..LoopConfig::default() };
    let mut replies = vec![broken(1), broken(2)];
    // axiom-phase replies that never introduce an axiom
    replies.extend((1..=10).map(|_| clean()));
    let (r, gw) = rig.run(&cfg, replies, thm());
    assert_eq!(r.outcome, Outcome::Failed);
    assert_eq!(r.axiom_attempts.len(), 10);
    assert_eq!(r.stub_axiom.as_deref(), Some("thm_one"));
    assert!(r.introduced_axioms.is_empty());
    assert_eq!(gw.remaining(), 0);
    let census = rig.ws.census().unwrap();
    assert_eq!(census.axiom_name_list(), ["thm_one"]);
    let module = rig.ws.read_module(&thm().id).unwrap().unwrap();
    assert!(module.contains("axiom thm_one : 1 + 1 = 2"), "{module}");
    assert!(rig.ws.build().unwrap().success);
}

#[test]
fn untyped_header_falls_back_to_prop_stub() {
    let rig = Rig::new();
    let cfg = LoopConfig { max_attempts: 1, axiom_phase_enabled: false, ..LoopConfig::default() };
    let (r, _) = rig.run(&cfg, vec![lean("def thm_one := by --! error nope")], thm());
    assert_eq!(r.outcome, Outcome::Failed);
    assert_eq!(r.stub_axiom.as_deref(), Some("Thm_1_stub_ax"));
    assert!(r.axiom_attempts.is_empty());
    assert_eq!(rig.ws.census().unwrap().axiom_name_list(), ["Thm_1_stub_ax"]);
}

#[test]
fn axioms_in_main_loop_need_a_plan() {
    let rig = Rig::new();
    let cfg = LoopConfig { max_attempts: 1, axiom_phase_enabled: false, ..LoopConfig::default() };
    let (r, _) = rig.run(&cfg, vec![axiom_ok()], thm());
    assert_eq!(r.outcome, Outcome::Failed);
    assert!(r.attempts[0].build_success);
    assert_eq!(r.attempts[0].policy_errors, 1);

    let rig = Rig::new();
    let cfg = LoopConfig { axiom_planned: vec![thm().id], ..cfg };
    let (r, _) = rig.run(&cfg, vec![axiom_ok(), accept()], thm());
    assert_eq!(r.outcome, Outcome::Proved);
    assert_eq!(r.introduced_axioms, ["widget_main_ax"]);
}

#[test]
fn sorry_is_never_accepted() {
    let rig = Rig::new();
    let (r, _) = rig.run(&LoopConfig::default(), vec![lean("theorem thm_one : 1 + 1 = 2 := sorry"), clean(), accept()], thm());
    assert_eq!(r.attempts.len(), 2);
    assert!(!r.attempts[0].clean());
    assert_eq!(r.outcome, Outcome::Proved);
}

#[test]
fn remark_in_seven_attempts() {
    let rig = Rig::new();
    let stmt = Statement::new("Rem_1", StatementKind::Remark, "Zero is even.", &[]).unwrap();
    let mut replies: Vec<_> = (1..=6).map(broken).collect();
    replies.extend([clean(), accept()]);
    let replies: Vec<_> = replies.into_iter().map(|r| ChatResponse { latency_ms: 1000, ..r }).collect();
    let (r, _) = rig.run(&LoopConfig::default(), replies, stmt);
    assert_eq!(r.kind, StatementKind::Remark);
    assert_eq!(r.attempts.len(), 7);
    assert_eq!(r.outcome, Outcome::Proved);
    // logical clock: one second per backend reply
    assert_eq!(r.total_wall_ms, 8000);
    assert_eq!(r.attempts.iter().map(|a| a.wall_ms).sum::<u64>(), 8000);
}

fn chain() -> StatementSet {
    let d = Statement::new("Def_1", StatementKind::Definition, "A number is even if it is twice another.", &[]).unwrap();
    let l = Statement::new("Lem_1", StatementKind::Lemma, "Zero is even.", &["Def_1"]).unwrap();
    let t = Statement::new("Thm_1", StatementKind::Theorem, "Sums of evens are even.", &["Def_1", "Lem_1"]).unwrap();
    StatementSet::new("fp-chain", vec![d, l, t])
}

fn chain_replies() -> Vec<ChatResponse> {
    vec![
        lean("def IsEven (n : Nat) : Prop := ∃ k, n = 2 * k"),
        accept(),
        lean("theorem zero_even : IsEven 0 := ⟨0, rfl⟩"),
        accept(),
        lean("theorem add_even (a b : Nat) (ha : IsEven a) (hb : IsEven b) : IsEven (a + b) := by\n  obtain ⟨x, hx⟩ := ha\n  obtain ⟨y, hy⟩ := hb\n  exact ⟨x + y, by omega⟩"),
        accept(),
    ]
}

#[test]
fn run_over_a_chain() {
    let rig = Rig::new();
    let gw = Gateway::scripted(chain_replies());
    let cfg = LoopConfig::default();
    let run = Engine::new(&rig.ws, &gw, &cfg, &rig.prompts).formalize_all(&chain(), RunOptions::default()).unwrap();
    let ids: Vec<_> = run.results.iter().map(|r| r.statement_id.as_str()).collect();
    assert_eq!(ids, ["Def_1", "Lem_1", "Thm_1"]);
    assert!(run.results.iter().all(|r| r.outcome == Outcome::Proved));
    assert!(run.final_build.success);
    assert_eq!(run.census.sorry_count, 0);
    assert_eq!(run.census.total_declarations(), 3);
    assert!(run.manifest.warnings.is_empty(), "{:?}", run.manifest.warnings);
    assert_eq!(run.manifest.status, RunStatus::Complete);

    // the theorem module imports both dependencies and sees their code
    let t = rig.ws.read_module(&StatementId::parse("Thm_1").unwrap()).unwrap().unwrap();
    assert!(t.starts_with("import Merlean.Statements.Def_1\nimport Merlean.Statements.Lem_1\n\n"));
    let records = gw.transcript().records().to_vec();
    let prompt = &records[4].request.messages[1].content;
    assert!(prompt.contains("def IsEven (n : Nat) : Prop"), "{prompt}");
    assert!(prompt.contains("theorem zero_even : IsEven 0"));

    assert_eq!(load_manifest(&run.manifest_path).unwrap(), run.manifest);
}

#[test]
fn resume_skips_finished_statements() {
    let rig = Rig::new();
    let cfg = LoopConfig::default();
    // first run dies when the script runs out during the theorem
    let gw = Gateway::scripted(chain_replies()[..4].to_vec());
    let err = Engine::new(&rig.ws, &gw, &cfg, &rig.prompts).formalize_all(&chain(), RunOptions::default());
    assert!(matches!(err, Err(EngineError::Gateway(GatewayError::ScriptedUnderflow { .. }))));
    let m = load_manifest(&manifest_path(rig.ws.root())).unwrap();
    assert_eq!(m.status, RunStatus::Running);
    assert_eq!(m.results.len(), 2);

    let gw = Gateway::scripted(chain_replies()[4..].to_vec());
    let opts = RunOptions { resume: true, ..RunOptions::default() };
    let run = Engine::new(&rig.ws, &gw, &cfg, &rig.prompts).formalize_all(&chain(), opts).unwrap();
    assert_eq!(tags(&gw), ["formalize/Thm_1/attempt1", "faithfulness/Thm_1/attempt1"]);
    assert_eq!(run.results.len(), 3);
    assert!(run.final_build.success);
}

#[test]
fn resume_rejects_other_sources() {
    let rig = Rig::new();
    let cfg = LoopConfig::default();
    let gw = Gateway::scripted(chain_replies());
    Engine::new(&rig.ws, &gw, &cfg, &rig.prompts).formalize_all(&chain(), RunOptions::default()).unwrap();
    let mut other = chain();
    other.source_fingerprint = "different".into();
    let opts = RunOptions { resume: true, ..RunOptions::default() };
    let gw = Gateway::scripted(vec![]);
    let err = Engine::new(&rig.ws, &gw, &cfg, &rig.prompts).formalize_all(&other, opts);
    assert!(matches!(err, Err(EngineError::Invalid(_))));
}

#[test]
fn failed_dependency_warns_and_unblocks() {
    let rig = Rig::new();
    let cfg = LoopConfig { max_attempts: 1, axiom_phase_enabled: false, ..LoopConfig::default() };
    let set = StatementSet::new("fp", chain().statements[..2].to_vec());
    let replies = vec![lean("def IsEven (n : Nat) : Prop := by --! error oops"), lean("theorem zero_ok : True := trivial"), accept()];
    let gw = Gateway::scripted(replies);
    let run = Engine::new(&rig.ws, &gw, &cfg, &rig.prompts).formalize_all(&set, RunOptions::default()).unwrap();
    assert_eq!(run.results[0].outcome, Outcome::Failed);
    assert_eq!(run.results[1].outcome, Outcome::Proved);
    assert!(run.has_failures());
    assert_eq!(run.manifest.warnings, ["Lem_1 depends on failed Def_1 (stub axiom)"]);
    assert!(run.final_build.success);
    assert_eq!(run.census.axiom_name_list(), ["IsEven"]);
}

#[test]
fn empty_set() {
    let rig = Rig::new();
    let gw = Gateway::scripted(vec![]);
    let cfg = LoopConfig::default();
    let run = Engine::new(&rig.ws, &gw, &cfg, &rig.prompts)
        .formalize_all(&StatementSet::new("fp", vec![]), RunOptions::default())
        .unwrap();
    assert!(run.results.is_empty());
    assert!(run.final_build.success);
    assert_eq!(run.census.total_declarations(), 0);
    assert_eq!(gw.call_count(), 0);
}

#[test]
fn concurrent_workers_respect_order() {
    let rig = Rig::new();
    let d = Statement::new("Def_1", StatementKind::Definition, "d", &[]).unwrap();
    let d2 = Statement::new("Def_2", StatementKind::Definition, "e", &[]).unwrap();
    let t = Statement::new("Thm_1", StatementKind::Theorem, "t", &["Def_1", "Def_2"]).unwrap();
    let set = StatementSet::new("fp", vec![d, d2, t]);
    let cfg = LoopConfig { workers: 2, faithfulness_enabled: false, ..LoopConfig::default() };
    // identical replies, so the interleaving of the two definitions does not matter
    let gw = Gateway::scripted(vec![lean("theorem t_ok : True := trivial"); 3]);
    let run = Engine::new(&rig.ws, &gw, &cfg, &rig.prompts).formalize_all(&set, RunOptions::default()).unwrap();
    assert_eq!(run.results.last().unwrap().statement_id.as_str(), "Thm_1");
    assert!(run.results.iter().all(|r| r.outcome == Outcome::Proved));
}
