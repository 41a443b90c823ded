//! LaTeX blueprint, narrative and `graph.json` output.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{BlueprintNode, DeclGraph};
use crate::canonical::{atomic_write, to_canonical_json};
use crate::lean::DeclKind;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EmittedFiles {
    /// Written files relative to the output directory, in write order.
    pub files: Vec<PathBuf>,
}

impl EmittedFiles {
    fn write(&mut self, out_dir: &Path, rel: impl Into<PathBuf>, text: &str) -> io::Result<()> {
        let rel = rel.into();
        let path = out_dir.join(&rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        atomic_write(&path, text.as_bytes())?;
        self.files.push(rel);
        Ok(())
    }
}

/// Escapes text for LaTeX text mode.
pub fn latex_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\textbackslash{}"),
            '{' | '}' | '_' | '#' | '$' | '%' | '&' => {
                out.push('\\');
                out.push(c);
            }
            '^' => out.push_str("\\textasciicircum{}"),
            '~' => out.push_str("\\textasciitilde{}"),
            _ => out.push(c),
        }
    }
    out
}

/// A `\label` key for a declaration name. Characters outside a safe ASCII
/// set are hex-encoded, so distinct names give distinct keys.
pub fn label_for(name: &str) -> String {
    let mut out = String::from("lean:");
    for c in name.chars() {
        if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '\'' | '-') {
            out.push(c);
        } else {
            out.push_str(&format!("-u{:x}-", c as u32));
        }
    }
    out
}

fn environment(kind: DeclKind) -> &'static str {
    match kind {
        DeclKind::Theorem => "theorem",
        DeclKind::Lemma => "lemma",
        DeclKind::Axiom => "assumption",
        DeclKind::Def | DeclKind::Abbrev | DeclKind::Instance | DeclKind::Structure | DeclKind::Inductive => {
            "definition"
        }
    }
}

fn file_stem(module: &str) -> String {
    module.replace('.', "-")
}

const MACROS: &str = r"\usepackage[T1]{fontenc}
\usepackage[utf8]{inputenc}
\usepackage{amsmath,amssymb,amsthm}
\usepackage{hyperref}
\providecommand{\lean}[1]{}
\providecommand{\leanok}{}
\providecommand{\uses}[1]{}
\newtheoremstyle{unverified}{}{}{\slshape}{}{\bfseries\scshape}{.}{ }{}
";

const PREAMBLE: &str = r"\theoremstyle{plain}
\newtheorem{theorem}{Theorem}[chapter]
\newtheorem{lemma}[theorem]{Lemma}
\theoremstyle{definition}
\newtheorem{definition}[theorem]{Definition}
\theoremstyle{unverified}
\newtheorem{assumption}[theorem]{Assumption}
";

fn node_block(node: &BlueprintNode) -> String {
    let env = environment(node.kind);
    let uses: Vec<String> = node.uses.iter().map(|u| label_for(u)).collect();
    let mut s = format!(
        "\\begin{{{env}}}[\\texttt{{{}}}]\n\\label{{{}}}\n\\lean{{{}}}\n",
        latex_escape(&node.name),
        label_for(&node.name),
        node.name
    );
    if node.verified {
        s.push_str("\\leanok\n");
    }
    s.push_str(&format!("\\uses{{{}}}\n{}\n\\end{{{env}}}\n", uses.join(","), node.nl_statement));
    if let Some(note) = &node.nl_proof_note {
        s.push_str("\\begin{proof}\n");
        if node.verified {
            s.push_str("\\leanok\n");
        }
        s.push_str(&format!("{note}\n\\end{{proof}}\n"));
    }
    s
}

/// Writes `blueprint/`: `main.tex` (standalone), `preamble.tex`,
/// `content.tex`, one chapter per module and the assumptions index.
pub fn emit_blueprint(graph: &DeclGraph, nodes: &[BlueprintNode], out_dir: &Path) -> io::Result<EmittedFiles> {
    assert_eq!(graph.nodes.len(), nodes.len(), "one blueprint node per declaration");
    let dir = out_dir.join("blueprint");
    let chapters_dir = dir.join("chapters");
    if chapters_dir.exists() {
        fs::remove_dir_all(&chapters_dir)?;
    }
    let mut files = EmittedFiles::default();

    // chapters in module order; nodes keep their graph order within a module
    let mut chapters: Vec<(&str, Vec<&BlueprintNode>)> = Vec::new();
    for node in nodes {
        match chapters.last_mut() {
            Some((m, list)) if *m == node.module => list.push(node),
            _ => chapters.push((&node.module, vec![node])),
        }
    }
    let mut content = String::new();
    for (module, list) in &chapters {
        let stem = file_stem(module);
        let mut text = format!("\\chapter{{\\texttt{{{}}}}}\n", latex_escape(module));
        for node in list {
            text.push('\n');
            text.push_str(&node_block(node));
        }
        files.write(out_dir, format!("blueprint/chapters/{stem}.tex"), &text)?;
        content.push_str(&format!("\\input{{chapters/{stem}.tex}}\n"));
    }
    content.push_str("\\input{assumptions.tex}\n");

    let mut index = String::from("\\chapter*{Assumptions}\n\\addcontentsline{toc}{chapter}{Assumptions}\n");
    let axioms: Vec<&BlueprintNode> = nodes.iter().filter(|n| n.axiom_flag).collect();
    if axioms.is_empty() {
        index.push_str("The library declares no axioms.\n");
    } else {
        index.push_str("Every result that depends on the following declarations is conditional on them.\n\\begin{itemize}\n");
        for n in axioms {
            index.push_str(&format!(
                "\\item \\texttt{{{}}} (Assumption~\\ref{{{}}}, module \\texttt{{{}}})\n",
                latex_escape(&n.name),
                label_for(&n.name),
                latex_escape(&n.module)
            ));
        }
        index.push_str("\\end{itemize}\n");
    }
    files.write(out_dir, "blueprint/assumptions.tex", &index)?;
    files.write(out_dir, "blueprint/content.tex", &content)?;
    files.write(out_dir, "blueprint/preamble.tex", &format!("{MACROS}{PREAMBLE}"))?;
    files.write(
        out_dir,
        "blueprint/main.tex",
        "\\documentclass{report}\n\\input{preamble.tex}\n\\title{Blueprint}\n\\begin{document}\n\\maketitle\n\\tableofcontents\n\\input{content.tex}\n\\end{document}\n",
    )?;
    Ok(files)
}

fn narrative_block(node: &BlueprintNode) -> String {
    let env = environment(node.kind);
    let mut s = format!(
        "\\begin{{{env}}}\\label{{{}}}\n{}\\footnote{{Formal declaration \\texttt{{{}}} in \\texttt{{{}}}.}}\n\\end{{{env}}}\n",
        label_for(&node.name),
        node.nl_statement,
        latex_escape(&node.name),
        latex_escape(&node.module)
    );
    if let Some(note) = &node.nl_proof_note {
        s.push_str(&format!("\\begin{{proof}}\n{note}\n\\end{{proof}}\n"));
    }
    s
}

/// Writes `narrative.tex`: assumptions first, then every other declaration
/// with dependencies before dependents.
pub fn emit_narrative(graph: &DeclGraph, nodes: &[BlueprintNode], out_dir: &Path) -> io::Result<EmittedFiles> {
    assert_eq!(graph.nodes.len(), nodes.len(), "one blueprint node per declaration");
    let mut text = String::from("\\documentclass{article}\n");
    text.push_str(MACROS);
    text.push_str(&PREAMBLE.replace("[chapter]", "[section]"));
    text.push_str("\\title{A Guided Tour of the Formal Development}\n\\date{}\n\\begin{document}\n\\maketitle\n");
    let axioms: Vec<&BlueprintNode> = nodes.iter().filter(|n| n.axiom_flag).collect();
    if !axioms.is_empty() {
        text.push_str(
            "\n\\section{Assumptions}\nThe development rests on the following unproved assumptions. \
             Results that use them hold only conditionally.\n",
        );
        for n in axioms {
            text.push('\n');
            text.push_str(&narrative_block(n));
        }
    }
    text.push_str("\n\\section{Development}\n");
    let groups = graph.dependency_groups();
    let mut any = false;
    for group in groups {
        let members: Vec<&BlueprintNode> = group.iter().map(|&i| &nodes[i]).filter(|n| !n.axiom_flag).collect();
        if members.is_empty() {
            continue;
        }
        any = true;
        if members.len() > 1 {
            text.push_str("\nThe next declarations refer to one another and are introduced together.\n");
        }
        for n in members {
            text.push('\n');
            text.push_str(&narrative_block(n));
        }
    }
    if !any {
        text.push_str("There are no declarations to describe.\n");
    }
    text.push_str("\n\\end{document}\n");
    let mut files = EmittedFiles::default();
    files.write(out_dir, "narrative.tex", &text)?;
    Ok(files)
}

#[derive(Serialize)]
struct GraphNodeJson<'a> {
    name: &'a str,
    kind: DeclKind,
    module: &'a str,
    axiom: bool,
}

#[derive(Serialize)]
struct GraphJson<'a> {
    nodes: Vec<GraphNodeJson<'a>>,
    edges: Vec<[&'a str; 2]>,
}

/// Writes the canonical `graph.json`.
pub fn emit_graph_json(graph: &DeclGraph, out_dir: &Path) -> io::Result<EmittedFiles> {
    let doc = GraphJson {
        nodes: graph
            .nodes
            .iter()
            .map(|d| GraphNodeJson { name: &d.name, kind: d.kind, module: &d.module, axiom: d.kind == DeclKind::Axiom })
            .collect(),
        edges: graph.edges.iter().map(|&(a, b)| [graph.nodes[a].name.as_str(), graph.nodes[b].name.as_str()]).collect(),
    };
    let bytes = to_canonical_json(&doc).map_err(io::Error::other)?;
    let mut files = EmittedFiles::default();
    files.write(out_dir, "graph.json", std::str::from_utf8(&bytes).expect("json is utf-8"))?;
    Ok(files)
}

/// Blueprint, narrative and graph in one go.
pub fn emit_all(graph: &DeclGraph, nodes: &[BlueprintNode], out_dir: &Path) -> io::Result<EmittedFiles> {
    let mut all = emit_blueprint(graph, nodes, out_dir)?;
    all.files.extend(emit_narrative(graph, nodes, out_dir)?.files);
    all.files.extend(emit_graph_json(graph, out_dir)?.files);
    Ok(all)
}

/// Axiom names listed in an emitted assumptions index, for cross-checks.
pub fn assumptions_in_index(index_tex: &str) -> Vec<String> {
    let mut names = BTreeMap::new();
    for line in index_tex.lines().filter(|l| l.starts_with("\\item \\texttt{")) {
        let rest = &line["\\item \\texttt{".len()..];
        let mut depth = 0;
        let mut end = rest.len();
        let mut prev_backslash = false;
        for (i, c) in rest.char_indices() {
            match c {
                '{' if !prev_backslash => depth += 1,
                '}' if !prev_backslash => {
                    if depth == 0 {
                        end = i;
                        break;
                    }
                    depth -= 1;
                }
                _ => {}
            }
            prev_backslash = c == '\\' && !prev_backslash;
        }
        let name = rest[..end].replace("\\_", "_").replace("\\textbackslash{}", "\\");
        names.insert(name, ());
    }
    names.into_keys().collect()
}
