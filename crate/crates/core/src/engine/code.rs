//! Turning backend replies into module files.

use crate::lean::decls::{scan, DeclKind};

/// Lean code from a reply: every ```lean block concatenated, else the first
/// fenced block, else the whole reply.
pub fn extract_lean_code(reply: &str) -> String {
    let mut blocks: Vec<(String, String)> = Vec::new();
    let mut rest = reply;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        let Some(nl) = after.find('\n') else { break };
        let lang = after[..nl].trim().to_string();
        let body = &after[nl + 1..];
        let Some(close) = body.find("```") else {
            blocks.push((lang, body.to_string()));
            break;
        };
        blocks.push((lang, body[..close].to_string()));
        rest = &body[close + 3..];
    }
    let lean: Vec<&str> = blocks.iter().filter(|(l, _)| l == "lean" || l == "lean4").map(|(_, b)| b.as_str()).collect();
    let code = if !lean.is_empty() {
        lean.join("\n")
    } else if let Some((_, b)) = blocks.first() {
        b.clone()
    } else {
        reply.to_string()
    };
    code.trim_matches('\n').to_string()
}

/// Prepends `imports` to `code`, merging any `import` lines the code brings
/// along. The result ends with exactly one newline.
pub fn assemble_module(imports: &[String], code: &str) -> String {
    let mut all: Vec<String> = imports.to_vec();
    let mut body = Vec::new();
    let mut in_header = true;
    for line in code.lines() {
        let t = line.trim();
        if in_header {
            if let Some(m) = t.strip_prefix("import ") {
                for m in m.split_whitespace() {
                    if !all.iter().any(|x| x == m) {
                        all.push(m.to_string());
                    }
                }
                continue;
            }
            if t.is_empty() {
                continue;
            }
            in_header = false;
        }
        body.push(line);
    }
    let mut out: String = all.iter().map(|m| format!("import {m}\n")).collect();
    if !out.is_empty() {
        out.push('\n');
    }
    out.push_str(body.join("\n").trim_end());
    out.push('\n');
    out
}

/// The header of the last principal declaration of `code`, restated as an
/// axiom of the same name: `theorem t (n : Nat) : P n := ...` becomes
/// `axiom t (n : Nat) : P n`.
pub fn stub_from_header(code: &str) -> Option<(String, String)> {
    let decls = scan(code).decls;
    let d = decls.iter().rev().find(|d| {
        matches!(d.kind, DeclKind::Theorem | DeclKind::Lemma | DeclKind::Def | DeclKind::Abbrev | DeclKind::Axiom)
    })?;
    let kw = d.kind.as_str();
    let rest = d.signature.strip_prefix(kw)?.trim_start();
    let local_name = rest.split_whitespace().next()?;
    let binders_and_type = rest[local_name.len()..].trim();
    // needs an explicit type to be stated as an axiom
    if !has_top_level_colon(binders_and_type) {
        return None;
    }
    Some((d.name.clone(), format!("axiom {local_name} {binders_and_type}")))
}

fn has_top_level_colon(s: &str) -> bool {
    let mut depth = 0i32;
    let chars: Vec<char> = s.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        match c {
            '(' | '[' | '{' | '⦃' | '⟨' => depth += 1,
            ')' | ']' | '}' | '⦄' | '⟩' => depth -= 1,
            ':' if depth == 0 && chars.get(i + 1) != Some(&'=') => return true,
            _ => {}
        }
    }
    false
}

/// Axiom names must carry the `_ax`/`_aux` suffix.
pub fn has_axiom_suffix(name: &str) -> bool {
    let last = name.rsplit('.').next().unwrap_or(name);
    last.ends_with("_ax") || last.ends_with("_aux")
}
