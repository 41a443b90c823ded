//! Lean library back to prose: declaration parsing, the declaration graph,
//! isolated per-declaration translation, and the blueprint/narrative
//! emitters.

pub mod emit;

use std::collections::{BTreeMap, BTreeSet};
use std::io;

use serde::Serialize;

use crate::gateway::{AskError, Gateway, GatewayError, Message};
use crate::graph::stable_topological_order;
use crate::lean::decls::{scan, SkippedConstruct};
use crate::lean::lexer::{lex, TokenKind};
use crate::lean::{natural_cmp, DeclKind, Workspace};
use crate::prompts::Prompts;

pub use emit::{emit_all, emit_blueprint, emit_graph_json, emit_narrative, latex_escape, EmittedFiles};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParsedDeclaration {
    pub name: String,
    pub kind: DeclKind,
    /// Source file relative to the workspace root.
    pub file: String,
    /// Dotted module name.
    pub module: String,
    /// 1-based first and last line.
    pub span: (usize, usize),
    pub signature: String,
    pub body_present: bool,
    pub doc: Option<String>,
    pub referenced_names: BTreeSet<String>,
    /// Declaration source text, doc comment and attributes included.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkipEntry {
    pub file: String,
    pub keyword: String,
    pub line: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedLibrary {
    /// Module order (imports first), then source order.
    pub decls: Vec<ParsedDeclaration>,
    pub skipped: Vec<SkipEntry>,
    /// Modules in emission order.
    pub modules: Vec<String>,
}

fn module_of(file: &str) -> String {
    file.strip_suffix(".lean").unwrap_or(file).replace('/', ".")
}

fn line_at(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

/// Parses library sources given as `(root-relative path, text)`. Modules
/// are ordered so that imported modules come first, ties in natural order.
pub fn parse_sources(files: &[(String, String)]) -> ParsedLibrary {
    let mut files: Vec<&(String, String)> = files.iter().collect();
    files.sort_by(|a, b| natural_cmp(&a.0, &b.0));
    let modules: Vec<String> = files.iter().map(|(f, _)| module_of(f)).collect();
    let index: BTreeMap<&str, usize> = modules.iter().enumerate().map(|(i, m)| (m.as_str(), i)).collect();
    let deps: Vec<Vec<usize>> = files
        .iter()
        .map(|(_, src)| {
            let mut ds: Vec<usize> = src
                .lines()
                .filter_map(|l| l.strip_prefix("import "))
                .flat_map(str::split_whitespace)
                .filter_map(|m| index.get(m).copied())
                .collect();
            ds.sort_unstable();
            ds.dedup();
            ds
        })
        .collect();
    // import cycles cannot build; fall back to natural order
    let order = stable_topological_order(&deps).unwrap_or_else(|_| (0..files.len()).collect());

    let mut out = ParsedLibrary::default();
    for i in order {
        let (file, src) = files[i];
        let scanned = scan(src);
        for d in scanned.decls {
            out.decls.push(ParsedDeclaration {
                name: d.name,
                kind: d.kind,
                file: file.clone(),
                module: modules[i].clone(),
                span: (line_at(src, d.span.0), line_at(src, d.span.1)),
                signature: d.signature,
                body_present: d.has_body,
                doc: d.doc,
                referenced_names: d.referenced,
                source: src[d.span.0..d.span.1].to_string(),
            });
        }
        out.skipped.extend(scanned.skipped.into_iter().map(|SkippedConstruct { keyword, line }| SkipEntry {
            file: file.clone(),
            keyword,
            line,
        }));
        out.modules.push(modules[i].clone());
    }
    out
}

/// Parses every library file of the workspace.
pub fn parse_lean_files(ws: &Workspace) -> io::Result<ParsedLibrary> {
    let mut files = Vec::new();
    for rel in ws.library_files()? {
        let text = std::fs::read_to_string(ws.root().join(&rel))?;
        files.push((rel, text));
    }
    Ok(parse_sources(&files))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeclGraph {
    pub nodes: Vec<ParsedDeclaration>,
    /// `(from, to)`: `from` references `to`. Sorted, no self-edges.
    pub edges: BTreeSet<(usize, usize)>,
    /// References that did not resolve inside the library, per node.
    pub external: Vec<BTreeSet<String>>,
    /// Strongly connected groups of more than one node (mutual recursion).
    pub cycles: Vec<Vec<String>>,
}

impl DeclGraph {
    pub fn uses(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.range((node, 0)..(node + 1, 0)).map(|&(_, to)| to)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|d| d.name == name)
    }

    pub fn edge_names(&self) -> Vec<(String, String)> {
        self.edges.iter().map(|&(a, b)| (self.nodes[a].name.clone(), self.nodes[b].name.clone())).collect()
    }

    /// Node groups with dependencies first. A group is a single node or a
    /// set of mutually recursive nodes, members in node order.
    pub fn dependency_groups(&self) -> Vec<Vec<usize>> {
        let groups = self.components();
        let mut group_of = vec![0; self.nodes.len()];
        for (g, members) in groups.iter().enumerate() {
            for &m in members {
                group_of[m] = g;
            }
        }
        let mut deps = vec![BTreeSet::new(); groups.len()];
        for &(a, b) in &self.edges {
            if group_of[a] != group_of[b] {
                deps[group_of[a]].insert(group_of[b]);
            }
        }
        let deps: Vec<Vec<usize>> = deps.into_iter().map(|s| s.into_iter().collect()).collect();
        let order = stable_topological_order(&deps).expect("condensation is acyclic");
        order.into_iter().map(|g| groups[g].clone()).collect()
    }

    pub fn dependency_order(&self) -> Vec<usize> {
        self.dependency_groups().into_iter().flatten().collect()
    }

    /// Strongly connected components, each sorted, ordered by least member.
    fn components(&self) -> Vec<Vec<usize>> {
        let mut g = petgraph::graph::DiGraph::<(), ()>::new();
        let ids: Vec<_> = (0..self.nodes.len()).map(|_| g.add_node(())).collect();
        for &(a, b) in &self.edges {
            g.add_edge(ids[a], ids[b], ());
        }
        let mut comps: Vec<Vec<usize>> = petgraph::algo::tarjan_scc(&g)
            .into_iter()
            .map(|c| {
                let mut c: Vec<usize> = c.into_iter().map(|n| n.index()).collect();
                c.sort_unstable();
                c
            })
            .collect();
        comps.sort();
        comps
    }
}

/// Edge `(A, B)` iff A references B's name, resolved against A's enclosing
/// namespaces from the innermost outwards.
pub fn build_decl_graph(decls: Vec<ParsedDeclaration>) -> DeclGraph {
    let mut by_name: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, d) in decls.iter().enumerate() {
        by_name.entry(d.name.as_str()).or_insert(i);
    }
    let mut edges = BTreeSet::new();
    let mut external = Vec::with_capacity(decls.len());
    for (i, d) in decls.iter().enumerate() {
        let ns: Vec<&str> = d.name.split('.').collect();
        let ns = &ns[..ns.len() - 1];
        let mut ext = BTreeSet::new();
        for r in &d.referenced_names {
            let hit = (0..=ns.len()).rev().find_map(|k| {
                let candidate = if k == 0 { r.clone() } else { format!("{}.{r}", ns[..k].join(".")) };
                by_name.get(candidate.as_str()).copied()
            });
            match hit {
                Some(j) if j != i => {
                    edges.insert((i, j));
                }
                Some(_) => {}
                None => {
                    ext.insert(r.clone());
                }
            }
        }
        external.push(ext);
    }
    let mut graph = DeclGraph { nodes: decls, edges, external, cycles: Vec::new() };
    graph.cycles = graph
        .components()
        .into_iter()
        .filter(|c| c.len() > 1)
        .map(|c| c.into_iter().map(|i| graph.nodes[i].name.clone()).collect())
        .collect();
    graph
}

/// Declaration source without comments of any kind; a formalizer may have
/// copied original prose into doc comments.
pub fn strip_comments(src: &str) -> String {
    let toks: Vec<_> = lex(src)
        .into_iter()
        .filter(|t| !matches!(t.kind, TokenKind::DocComment | TokenKind::ModuleDoc))
        .collect();
    let mut out = String::new();
    let mut last = 0;
    for t in &toks {
        let gap = &src[last..t.start];
        if gap.contains("--") || gap.contains("/-") {
            let newlines = gap.matches('\n').count();
            if newlines == 0 {
                out.push(' ');
            } else {
                out.push_str(&"\n".repeat(newlines));
                // keep the indentation of the next token's line
                out.push_str(&gap[gap.rfind('\n').map_or(gap.len(), |p| p + 1)..].replace(|c: char| !c.is_whitespace(), " "));
            }
        } else if !out.is_empty() {
            out.push_str(gap);
        }
        out.push_str(&t.text);
        last = t.end;
    }
    let kept: Vec<&str> = out.lines().map(str::trim_end).filter(|l| !l.trim().is_empty()).collect();
    kept.join("\n")
}

pub const AXIOM_MARKER: &str = "Unverified assumption:";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlueprintNode {
    pub name: String,
    pub kind: DeclKind,
    pub module: String,
    pub nl_statement: String,
    pub nl_proof_note: Option<String>,
    pub axiom_flag: bool,
    /// Declaration comes from a strictly building library.
    pub verified: bool,
    pub uses: Vec<String>,
    /// The translation reply never parsed and the fallback text was used.
    pub fallback: bool,
}

/// Parses the `STATEMENT:` / `PROOFNOTE:` reply grammar.
pub fn parse_informal_reply(reply: &str) -> Result<(String, Option<String>), String> {
    let s = reply.find("STATEMENT:").ok_or("missing STATEMENT: section")?;
    let rest = &reply[s + "STATEMENT:".len()..];
    let (statement, note) = match rest.find("PROOFNOTE:") {
        Some(p) => (&rest[..p], Some(rest[p + "PROOFNOTE:".len()..].trim())),
        None => (rest, None),
    };
    let statement = statement.trim();
    if statement.is_empty() {
        return Err("empty STATEMENT: section".into());
    }
    let note = note.filter(|n| !n.is_empty() && !n.eq_ignore_ascii_case("none")).map(str::to_string);
    for text in std::iter::once(statement).chain(note.as_deref()) {
        check_braces(text)?;
    }
    Ok((statement.to_string(), note))
}

fn check_braces(text: &str) -> Result<(), String> {
    let mut depth = 0i64;
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => {
                chars.next();
            }
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth < 0 {
                    return Err("unbalanced braces".into());
                }
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err("unbalanced braces".into());
    }
    Ok(())
}

pub fn fallback_statement(name: &str, kind: DeclKind) -> String {
    format!("Formal declaration \\texttt{{{}}} of kind {}; see source.", latex_escape(name), kind)
}

#[derive(Debug, Clone, Default)]
pub struct InformalizeOutcome {
    pub nodes: Vec<BlueprintNode>,
    pub warnings: Vec<String>,
}

/// Translates one declaration. The request carries only the declaration's
/// comment-free code and the signatures of the declarations it uses.
pub fn informalize_decl(
    graph: &DeclGraph,
    node: usize,
    gateway: &Gateway,
    prompts: &Prompts,
    budget: u32,
) -> Result<(BlueprintNode, Option<String>), GatewayError> {
    let d = &graph.nodes[node];
    let uses: Vec<usize> = graph.uses(node).collect();
    let context = if uses.is_empty() {
        "(none)".to_string()
    } else {
        uses.iter().map(|&j| strip_comments(&graph.nodes[j].signature)).collect::<Vec<_>>().join("\n")
    };
    let messages = vec![
        Message::system(prompts.render("informalize/system", &[])),
        Message::user(prompts.render(
            "informalize/decl",
            &[
                ("name", &d.name),
                ("kind", d.kind.as_str()),
                ("module", &d.module),
                ("code", &strip_comments(&d.source)),
                ("context", &context),
            ],
        )),
    ];
    let tag = format!("informalize/{}", d.name);
    let (statement, note, warning) = match gateway.ask_parsed(
        &tag,
        messages,
        budget,
        |e| prompts.render("informalize/reprompt", &[("error", e)]),
        parse_informal_reply,
    ) {
        Ok((s, n)) => (s, n, None),
        Err(AskError::Unparseable { calls, error, .. }) => (
            fallback_statement(&d.name, d.kind),
            None,
            Some(format!("informalization of {} fell back after {calls} calls: {error}", d.name)),
        ),
        Err(AskError::Gateway(e)) => return Err(e),
    };
    let axiom = d.kind == DeclKind::Axiom;
    let nl_statement = if axiom { format!("{AXIOM_MARKER} {statement}") } else { statement };
    let node = BlueprintNode {
        name: d.name.clone(),
        kind: d.kind,
        module: d.module.clone(),
        nl_statement,
        nl_proof_note: note,
        axiom_flag: axiom,
        verified: !axiom,
        uses: uses.iter().map(|&j| graph.nodes[j].name.clone()).collect(),
        fallback: warning.is_some(),
    };
    Ok((node, warning))
}

/// Translates every node in graph order. `verified` marks whether the
/// library passed its strict build.
pub fn informalize_graph(
    graph: &DeclGraph,
    gateway: &Gateway,
    prompts: &Prompts,
    budget: u32,
    verified: bool,
) -> Result<InformalizeOutcome, GatewayError> {
    let mut out = InformalizeOutcome::default();
    for cycle in &graph.cycles {
        out.warnings.push(format!("mutually recursive declarations: {}", cycle.join(", ")));
    }
    for i in 0..graph.nodes.len() {
        let (mut node, warning) = informalize_decl(graph, i, gateway, prompts, budget)?;
        node.verified &= verified;
        out.nodes.push(node);
        out.warnings.extend(warning);
    }
    Ok(out)
}
