//! Top-level declaration scanner over the token stream.
//!
//! A command starts at a token that is first on its line and sits in column
//! 0 (or anywhere inside a `mutual` block). A declaration runs from its
//! leading doc comment/attributes to the next command start.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::lexer::{lex, Token, TokenKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeclKind {
    Def,
    Theorem,
    Lemma,
    Axiom,
    Instance,
    Abbrev,
    Structure,
    Inductive,
}

impl DeclKind {
    pub const ALL: [DeclKind; 8] = [
        DeclKind::Def,
        DeclKind::Theorem,
        DeclKind::Lemma,
        DeclKind::Axiom,
        DeclKind::Instance,
        DeclKind::Abbrev,
        DeclKind::Structure,
        DeclKind::Inductive,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DeclKind::Def => "def",
            DeclKind::Theorem => "theorem",
            DeclKind::Lemma => "lemma",
            DeclKind::Axiom => "axiom",
            DeclKind::Instance => "instance",
            DeclKind::Abbrev => "abbrev",
            DeclKind::Structure => "structure",
            DeclKind::Inductive => "inductive",
        }
    }

    pub fn from_keyword(kw: &str) -> Option<DeclKind> {
        DeclKind::ALL.into_iter().find(|k| k.as_str() == kw)
    }
}

impl fmt::Display for DeclKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A declaration found by [`scan`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDecl {
    pub kind: DeclKind,
    /// Fully qualified (namespace prefix applied). Anonymous instances get
    /// a synthesized `instance_<line>` name.
    pub name: String,
    pub namespace: Vec<String>,
    /// 1-based line of the declaration keyword.
    pub line: usize,
    /// 1-based column of the declaration keyword.
    pub column: usize,
    /// 1-based line of the name token (keyword line for anonymous instances).
    pub name_line: usize,
    /// 1-based column of the name token.
    pub name_column: usize,
    /// Byte span from the doc comment/attributes to the end of the last token.
    pub span: (usize, usize),
    /// Header text: from the keyword up to `:=`/`where`/`|` at depth 0.
    pub signature: String,
    pub has_body: bool,
    pub doc: Option<String>,
    /// Identifiers referenced in the declaration, minus keywords, the
    /// declaration's own name and names bound locally or by `variable`.
    pub referenced: BTreeSet<String>,
}

/// A top-level construct the scanner recognized but does not treat as a
/// declaration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedConstruct {
    pub keyword: String,
    pub line: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScanResult {
    pub decls: Vec<RawDecl>,
    pub skipped: Vec<SkippedConstruct>,
    pub sorry_locations: Vec<(usize, usize)>,
}

const MODIFIERS: [&str; 9] = [
    "private",
    "protected",
    "noncomputable",
    "partial",
    "unsafe",
    "nonrec",
    "scoped",
    "local",
    "public",
];

/// Commands that end a preceding declaration but are not declarations.
const OTHER_COMMANDS: [&str; 29] = [
    "namespace",
    "section",
    "end",
    "open",
    "variable",
    "universe",
    "set_option",
    "attribute",
    "example",
    "class",
    "mutual",
    "import",
    "export",
    "notation",
    "infix",
    "infixl",
    "infixr",
    "prefix",
    "postfix",
    "macro",
    "macro_rules",
    "syntax",
    "elab",
    "opaque",
    "initialize",
    "omit",
    "include",
    "register_simp_attr",
    "declare_syntax_cat",
];

/// Reserved words and common tactic names; never counted as references.
pub const KEYWORDS: &[&str] = &[
    "def", "theorem", "lemma", "axiom", "instance", "abbrev", "structure", "inductive", "class", "where",
    "extends", "fun", "λ", "let", "have", "show", "from", "by", "at", "with", "if", "then", "else", "match",
    "do", "return", "for", "in", "calc", "suffices", "obtain", "intro", "intros", "rintro", "exact", "apply",
    "refine", "refine'", "rw", "rwa", "simp", "simp_all", "simpa", "dsimp", "norm_num", "ring", "ring_nf",
    "linarith", "nlinarith", "omega", "decide", "rfl", "trivial", "constructor", "cases", "rcases", "induction",
    "use", "exists", "existsi", "left", "right", "contradiction", "exfalso", "by_contra", "by_cases", "push_neg",
    "unfold", "field_simp", "positivity", "gcongr", "aesop", "tauto", "assumption", "specialize", "generalize",
    "subst", "congr", "ext", "funext", "change", "convert", "infer_instance", "exact_mod_cast", "push_cast",
    "norm_cast", "split", "next", "case", "all_goals", "any_goals", "first", "repeat", "try", "using",
    "only", "sorry", "Type", "Sort", "Prop", "forall", "deriving", "termination_by", "decreasing_by", "noncomputable",
    "private", "protected", "open", "namespace", "section", "end", "variable", "universe", "set_option", "mutual",
    "partial", "unsafe", "nonrec", "true", "false", "this", "set", "clear", "symm", "trans", "haveI", "letI",
    "show_term", "native_decide", "interval_cases", "fin_cases", "lift", "choose", "filter_upwards", "bound",
];

const BINDER_INTRO: [&str; 14] = ["fun", "λ", "∀", "∃", "∃!", "forall", "exists", "Σ", "∑", "∏", "⋃", "⋂", "∫", "Π"];
const NAME_INTRO: [&str; 9] = ["have", "let", "haveI", "letI", "set", "by_cases", "generalize", "choose", "lift"];
const LINE_BINDERS: [&str; 5] = ["intro", "intros", "rintro", "next", "case"];

fn is_open(t: &str) -> bool {
    matches!(t, "(" | "[" | "{" | "⟨" | "⦃" | "⟪")
}

fn is_close(t: &str) -> bool {
    matches!(t, ")" | "]" | "}" | "⟩" | "⦄" | "⟫")
}

/// Scans Lean source text into declarations, skipped constructs and
/// `sorry` positions (1-based line and column).
pub fn scan(src: &str) -> ScanResult {
    let toks = lex(src);
    let mut out = ScanResult::default();
    for t in &toks {
        if t.is_ident() && t.is("sorry") {
            out.sorry_locations.push((t.line, t.col + 1));
        }
    }

    let mut namespace: Vec<Vec<String>> = Vec::new();
    let mut in_mutual = false;
    let mut variable_bound: BTreeSet<String> = BTreeSet::new();

    // indices of command starts
    let mut starts: Vec<usize> = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let t = &toks[i];
        if t.first_on_line && (t.col == 0 || in_mutual) && is_command_start(&toks, i) {
            starts.push(i);
            // skip a doc comment/attribute prefix so it is not re-counted
            let head = skip_prefix(&toks, i);
            if head < toks.len() && toks[head].is("mutual") {
                in_mutual = true;
            } else if in_mutual && head < toks.len() && toks[head].is("end") {
                in_mutual = false;
            }
            i = head.max(i) + 1;
            continue;
        }
        i += 1;
    }

    for (n, &s) in starts.iter().enumerate() {
        let end = starts.get(n + 1).copied().unwrap_or(toks.len());
        let head = skip_prefix(&toks, s);
        if head >= end {
            continue;
        }
        let kw = toks[head].text.as_str();
        match kw {
            "namespace" => {
                if let Some(name) = toks.get(head + 1).filter(|t| t.is_ident() && head + 1 < end) {
                    namespace.push(name.text.split('.').map(str::to_string).collect());
                }
            }
            "section" => namespace.push(Vec::new()),
            "mutual" => namespace.push(Vec::new()),
            "end" => {
                namespace.pop();
            }
            "variable" => {
                collect_bound(&toks[head + 1..end], &mut variable_bound);
            }
            "import" | "open" | "set_option" | "universe" => {}
            _ => {
                if let Some(kind) = DeclKind::from_keyword(kw) {
                    let ns: Vec<String> = namespace.iter().flatten().cloned().collect();
                    out.decls.push(build_decl(src, &toks, s, head, end, kind, ns, &variable_bound));
                } else if !MODIFIERS.contains(&kw) {
                    out.skipped.push(SkippedConstruct { keyword: kw.to_string(), line: toks[head].line });
                }
            }
        }
    }
    out
}

/// True when the token at `i` can begin a command.
fn is_command_start(toks: &[Token], i: usize) -> bool {
    let t = &toks[i];
    match t.kind {
        TokenKind::DocComment => true,
        TokenKind::ModuleDoc => false,
        TokenKind::Ident => {
            let s = t.text.as_str();
            DeclKind::from_keyword(s).is_some() || MODIFIERS.contains(&s) || OTHER_COMMANDS.contains(&s)
        }
        TokenKind::Symbol => t.is("@[") || (t.is("#") && toks.get(i + 1).is_some_and(|n| n.is_ident() && n.start == t.end)),
        _ => false,
    }
}

/// Skips doc comment, attributes and modifiers; returns the index of the
/// command keyword.
fn skip_prefix(toks: &[Token], mut i: usize) -> usize {
    loop {
        let Some(t) = toks.get(i) else { return i };
        if t.kind == TokenKind::DocComment {
            i += 1;
        } else if t.is("@[") {
            let mut depth = 1;
            i += 1;
            while i < toks.len() && depth > 0 {
                if toks[i].is("[") || toks[i].is("@[") {
                    depth += 1;
                } else if toks[i].is("]") {
                    depth -= 1;
                }
                i += 1;
            }
        } else if t.is_ident() && MODIFIERS.contains(&t.text.as_str()) {
            // `noncomputable section` is a section, not a modifier
            if toks.get(i + 1).is_some_and(|n| n.is("section")) {
                return i + 1;
            }
            i += 1;
        } else {
            return i;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn build_decl(
    src: &str,
    toks: &[Token],
    start: usize,
    head: usize,
    end: usize,
    kind: DeclKind,
    namespace: Vec<String>,
    variable_bound: &BTreeSet<String>,
) -> RawDecl {
    let kw = &toks[head];
    let name_tok = toks.get(head + 1).filter(|t| t.is_ident() && head + 1 < end && !KEYWORDS.contains(&t.text.as_str()));
    let base = match name_tok {
        Some(t) => t.text.clone(),
        None => format!("instance_{}", kw.line),
    };
    let name = if namespace.is_empty() || base.starts_with("_root_.") {
        base.trim_start_matches("_root_.").to_string()
    } else {
        format!("{}.{}", namespace.join("."), base)
    };

    let mut depth = 0i32;
    let mut body_at = None;
    for (j, t) in toks.iter().enumerate().take(end).skip(head + 1) {
        if is_open(&t.text) {
            depth += 1;
        } else if is_close(&t.text) {
            depth -= 1;
        } else if depth <= 0 && (t.is(":=") || t.is("where") || t.is("|")) {
            body_at = Some(j);
            break;
        }
    }
    let sig_end = match body_at {
        Some(j) => toks[j].start,
        None => toks[end - 1].end,
    };
    let signature = src[kw.start..sig_end].trim().to_string();
    let doc = toks[start..head]
        .iter()
        .find(|t| t.kind == TokenKind::DocComment)
        .map(|t| t.text.trim_start_matches("/--").trim_end_matches("-/").trim().to_string());

    let body = &toks[head + 1..end];
    let mut bound = variable_bound.clone();
    collect_bound(body, &mut bound);
    let own = name_tok.map(|t| t.text.as_str());
    let referenced = body
        .iter()
        .filter(|t| t.is_ident())
        .map(|t| t.text.as_str())
        .filter(|s| Some(*s) != own && !KEYWORDS.contains(s))
        .filter(|s| {
            let first = s.split('.').next().unwrap_or(s);
            !bound.contains(first)
        })
        .map(str::to_string)
        .collect();

    let (name_line, name_column) = match name_tok {
        Some(t) => (t.line, t.col + 1),
        None => (kw.line, kw.col + 1),
    };
    RawDecl {
        kind,
        name,
        namespace,
        line: kw.line,
        column: kw.col + 1,
        name_line,
        name_column,
        span: (toks[start].start, toks[end - 1].end),
        signature,
        has_body: body_at.is_some() && kind != DeclKind::Axiom,
        doc,
        referenced,
    }
}

/// Collects names introduced by binders in a token slice.
fn collect_bound(toks: &[Token], bound: &mut BTreeSet<String>) {
    let mut add = |t: &Token| {
        if t.is_ident() && !KEYWORDS.contains(&t.text.as_str()) && !t.text.contains('.') {
            bound.insert(t.text.clone());
        }
    };
    for (i, t) in toks.iter().enumerate() {
        let s = t.text.as_str();
        if is_open(s) {
            // `(x y : T)`: identifiers directly followed by a colon
            let mut j = i + 1;
            while j < toks.len() && toks[j].is_ident() {
                j += 1;
            }
            if j > i + 1 && j < toks.len() && toks[j].is(":") {
                toks[i + 1..j].iter().for_each(&mut add);
            }
        } else if BINDER_INTRO.contains(&s) {
            // names up to the binder body
            for u in &toks[i + 1..] {
                if u.is(":") || u.is(",") || u.is("=>") || u.is("↦") || u.is(":=") {
                    break;
                }
                add(u);
            }
        } else if s == "obtain" || s == "with" {
            // destructuring patterns: everything up to `:=`/`:` on the same line
            for u in toks[i + 1..].iter().take_while(|u| u.line == t.line) {
                if u.is(":=") || u.is(":") || u.is("=>") {
                    break;
                }
                add(u);
            }
        } else if NAME_INTRO.contains(&s) {
            if let Some(u) = toks.get(i + 1) {
                add(u);
            }
        } else if LINE_BINDERS.contains(&s) {
            for u in toks[i + 1..].iter().take_while(|u| u.line == t.line && !u.is(";") && !u.is("<;>") && !u.is("=>")) {
                add(u);
            }
        } else if s == "|" {
            // match-arm pattern variables (lowercase heads only)
            for u in toks[i + 1..].iter().take_while(|u| !u.is("=>") && !u.is(":=")) {
                if u.text.chars().next().is_some_and(char::is_lowercase) {
                    add(u);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_names_and_namespaces() {
        let src = "namespace Foo\n\n/-- d -/\n@[simp] theorem bar (n : Nat) : n = n := rfl\n\nnoncomputable def baz : Nat := 1\nend Foo\n\ninstance : Inhabited Nat := ⟨0⟩\naxiom q_ax : False\n";
        let r = scan(src);
        let got: Vec<_> = r.decls.iter().map(|d| (d.kind, d.name.as_str())).collect();
        assert_eq!(
            got,
            [
                (DeclKind::Theorem, "Foo.bar"),
                (DeclKind::Def, "Foo.baz"),
                (DeclKind::Instance, "instance_9"),
                (DeclKind::Axiom, "q_ax")
            ]
        );
        assert_eq!(r.decls[0].doc.as_deref(), Some("d"));
        assert_eq!(r.decls[0].signature, "theorem bar (n : Nat) : n = n");
        assert!(r.decls[0].has_body);
        assert!(!r.decls[3].has_body);
    }

    #[test]
    fn indented_keywords_are_not_declarations() {
        let src = "def f : Nat :=\n  let theorem_x := 1\n  theorem_x\n  -- def g\n";
        assert_eq!(scan(src).decls.len(), 1);
    }

    #[test]
    fn mutual_blocks() {
        let src = "mutual\n  def even : Nat → Bool\n    | 0 => true\n    | n+1 => odd n\n  def odd : Nat → Bool\n    | 0 => false\n    | n+1 => even n\nend\ndef after := 1\n";
        let names: Vec<_> = scan(src).decls.into_iter().map(|d| d.name).collect();
        assert_eq!(names, ["even", "odd", "after"]);
    }

    #[test]
    fn references_exclude_bound_names() {
        let src = "variable (C : Type)\ntheorem t (h : P C) (x : Nat) : Q x := by\n  obtain <a, ha> := helper h\n  exact foo.mp ha a.1\n";
        let d = &scan(src).decls[0];
        let refs: Vec<_> = d.referenced.iter().map(String::as_str).collect();
        assert_eq!(refs, ["Nat", "P", "Q", "foo.mp", "helper"]);
    }

    #[test]
    fn sorry_positions_and_skips() {
        let src = "-- sorry\nexample : True := sorry\ntheorem t : True := by\n  sorry\n";
        let r = scan(src);
        assert_eq!(r.sorry_locations, [(2, 19), (4, 3)]);
        assert_eq!(r.skipped, [SkippedConstruct { keyword: "example".into(), line: 2 }]);
        assert_eq!(r.decls.len(), 1);
    }
}
