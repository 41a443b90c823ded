//! LaTeX source loading and the deterministic environment scan.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::ExtractError;
use crate::canonical::sha256_hex;
use crate::statement::StatementKind;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceDocument {
    /// Source text with `\input`/`\include` expanded one level deep.
    pub raw: String,
    pub path: PathBuf,
    /// Hex SHA-256 of `raw`.
    pub fingerprint: String,
}

impl SourceDocument {
    pub fn from_text(path: impl Into<PathBuf>, raw: impl Into<String>) -> SourceDocument {
        let raw = raw.into();
        SourceDocument { fingerprint: sha256_hex(raw.as_bytes()), raw, path: path.into() }
    }

    /// Reads a main `.tex` file, inlining `\input{}`/`\include{}` relative to
    /// its directory. Inputs that themselves input further files are
    /// rejected.
    pub fn load(path: &Path) -> Result<SourceDocument, ExtractError> {
        let main = read_tex(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut raw = String::with_capacity(main.len());
        let mut last = 0;
        for (start, end, target) in find_inputs(&main) {
            raw.push_str(&main[last..start]);
            let child_path = resolve(base, &target);
            let child = read_tex(&child_path)?;
            if let Some((_, _, nested)) = find_inputs(&child).into_iter().next() {
                return Err(ExtractError::Input(format!(
                    "{} inputs `{nested}`; only one level of \\input/\\include is supported",
                    child_path.display()
                )));
            }
            raw.push_str(&child);
            last = end;
        }
        raw.push_str(&main[last..]);
        Ok(SourceDocument::from_text(path, raw))
    }

    /// Paragraphs (blank-line separated, comments removed) of the source.
    pub fn paragraphs(&self) -> Vec<String> {
        let stripped: String = self.raw.lines().map(|l| format!("{}\n", strip_comment(l))).collect();
        stripped.split("\n\n").map(str::trim).filter(|p| !p.is_empty()).map(str::to_string).collect()
    }
}

fn read_tex(path: &Path) -> Result<String, ExtractError> {
    let bytes = fs::read(path).map_err(|e| ExtractError::Input(format!("cannot read {}: {e}", path.display())))?;
    String::from_utf8(bytes).map_err(|_| ExtractError::Input(format!("{} is not valid UTF-8", path.display())))
}

fn resolve(base: &Path, target: &str) -> PathBuf {
    let p = base.join(target.trim());
    if p.extension().is_none() {
        p.with_extension("tex")
    } else {
        p
    }
}

/// Text of a line before an unescaped `%`.
fn strip_comment(line: &str) -> &str {
    let bytes = line.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 2,
            b'%' => return &line[..i],
            _ => i += 1,
        }
    }
    line
}

/// `(start, end, target)` for each `\input{..}`/`\include{..}` outside comments.
fn find_inputs(src: &str) -> Vec<(usize, usize, String)> {
    let mut out = Vec::new();
    let mut offset = 0;
    for line in src.split_inclusive('\n') {
        let live = strip_comment(line);
        for cmd in ["\\input{", "\\include{"] {
            let mut from = 0;
            while let Some(i) = live[from..].find(cmd) {
                let s = from + i;
                let arg = s + cmd.len();
                if let Some(close) = live[arg..].find('}') {
                    out.push((offset + s, offset + arg + close + 1, live[arg..arg + close].to_string()));
                    from = arg + close + 1;
                } else {
                    break;
                }
            }
        }
        offset += line.len();
    }
    out.sort();
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RawCandidate {
    pub env_name: String,
    pub label: Option<String>,
    /// Optional `[...]` argument after `\begin{env}`.
    pub title: Option<String>,
    /// Environment body with the label (and title) removed.
    pub body: String,
    /// Byte span from `\begin` to the end of `\end{env}`.
    pub span: (usize, usize),
}

const VERBATIM: [&str; 6] = ["verbatim", "Verbatim", "lstlisting", "minted", "comment", "verbatim*"];

/// The default environment-name mapping.
pub fn default_env_map() -> BTreeMap<String, StatementKind> {
    use StatementKind::*;
    [
        ("theorem", Theorem),
        ("lemma", Lemma),
        ("definition", Definition),
        ("proposition", Proposition),
        ("corollary", Corollary),
        ("remark", Remark),
        ("thm", Theorem),
        ("lem", Lemma),
        ("defn", Definition),
        ("prop", Proposition),
        ("cor", Corollary),
        ("rem", Remark),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset].matches('\n').count() + 1
}

fn read_braced(src: &str, at: usize) -> Option<(String, usize)> {
    let rest = src.get(at..)?;
    if !rest.starts_with('{') {
        return None;
    }
    let close = rest.find('}')?;
    Some((rest[1..close].to_string(), at + close + 1))
}

/// Every balanced environment whose name is in `env_map`, outermost only,
/// in document order. Comments and verbatim-like environments are skipped.
pub fn scan_environments(
    doc: &SourceDocument,
    env_map: &BTreeMap<String, StatementKind>,
) -> Result<Vec<RawCandidate>, ExtractError> {
    let src = doc.raw.as_str();
    let bytes = src.as_bytes();
    let unbalanced = |env: &str, offset: usize| ExtractError::Unbalanced {
        env: env.to_string(),
        offset,
        line: line_of(src, offset),
    };
    // (name, begin offset, body start)
    let mut stack: Vec<(String, usize, usize)> = Vec::new();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'%' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'\\' => {
                let rest = &src[i..];
                if rest.starts_with("\\begin{") {
                    let (name, after) = read_braced(src, i + 6).ok_or_else(|| unbalanced("?", i))?;
                    if VERBATIM.contains(&name.as_str()) {
                        let close = format!("\\end{{{name}}}");
                        let end = src[after..].find(&close).ok_or_else(|| unbalanced(&name, i))?;
                        i = after + end + close.len();
                        continue;
                    }
                    stack.push((name, i, after));
                    i = after;
                } else if rest.starts_with("\\end{") {
                    let (name, after) = read_braced(src, i + 4).ok_or_else(|| unbalanced("?", i))?;
                    let Some((open, begin, body_start)) = stack.pop() else {
                        return Err(unbalanced(&name, i));
                    };
                    if open != name {
                        return Err(unbalanced(&open, begin));
                    }
                    let tracked = env_map.contains_key(&name);
                    let outermost = !stack.iter().any(|(n, _, _)| env_map.contains_key(n));
                    if tracked && outermost {
                        out.push(candidate(name, src, begin, body_start, i, after));
                    }
                    i = after;
                } else if rest.starts_with("\\verb") && !rest[5..].starts_with(|c: char| c.is_ascii_alphabetic()) {
                    let mut j = i + 5;
                    if src[j..].starts_with('*') {
                        j += 1;
                    }
                    match src[j..].chars().next() {
                        Some(delim) => {
                            let body = j + delim.len_utf8();
                            i = src[body..].find(delim).map_or(bytes.len(), |k| body + k + delim.len_utf8());
                        }
                        None => i = bytes.len(),
                    }
                } else {
                    // skip the escaped character (`\%`, `\\`, ...)
                    i += 1;
                    if let Some(c) = src[i..].chars().next() {
                        i += c.len_utf8();
                    }
                }
            }
            _ => i += 1,
        }
    }
    if let Some((name, begin, _)) = stack.pop() {
        return Err(unbalanced(&name, begin));
    }
    Ok(out)
}

fn candidate(env_name: String, src: &str, begin: usize, body_start: usize, end_start: usize, end: usize) -> RawCandidate {
    let mut body = src[body_start..end_start].to_string();
    let mut title = None;
    if body.starts_with('[') {
        if let Some(close) = body.find(']') {
            title = Some(body[1..close].to_string());
            body = body[close + 1..].to_string();
        }
    }
    let mut label = None;
    if let Some(at) = body.find("\\label{") {
        if let Some((key, after)) = read_braced(&body, at + 6) {
            label = Some(key);
            body.replace_range(at..after, "");
        }
    }
    RawCandidate { env_name, label, title, body, span: (begin, end) }
}
