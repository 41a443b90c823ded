//! Prompt templates with `{{placeholder}}` substitution.
//!
//! Built-in templates ship with the binary; a prompts directory laid out as
//! `<family>/<name>.txt` overrides any of them file by file.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

macro_rules! builtin {
    ($($key:literal),* $(,)?) => {
        &[$(($key, include_str!(concat!("../prompts/", $key, ".txt")))),*]
    };
}

const BUILTIN: &[(&str, &str)] = builtin!(
    "extract/system",
    "extract/extract",
    "extract/refine",
    "extract/repair",
    "extract/reprompt",
    "formalize/system",
    "formalize/initial",
    "formalize/fix",
    "faithfulness/system",
    "faithfulness/check",
    "faithfulness/reprompt",
    "axiom/system",
    "axiom/axiomatize",
    "informalize/system",
    "informalize/decl",
    "informalize/reprompt",
);

#[derive(Debug, Clone)]
pub struct Prompts {
    templates: BTreeMap<String, String>,
}

impl Default for Prompts {
    fn default() -> Self {
        Prompts::builtin()
    }
}

impl Prompts {
    pub fn builtin() -> Prompts {
        Prompts { templates: BUILTIN.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect() }
    }

    /// Built-ins overridden by any `<family>/<name>.txt` found under `dir`.
    pub fn with_overrides(dir: &Path) -> io::Result<Prompts> {
        let mut p = Prompts::builtin();
        for key in BUILTIN.iter().map(|(k, _)| *k) {
            match fs::read_to_string(dir.join(format!("{key}.txt"))) {
                Ok(text) => {
                    p.templates.insert(key.to_string(), text);
                }
                Err(e) if e.kind() == io::ErrorKind::NotFound => {}
                Err(e) => return Err(e),
            }
        }
        Ok(p)
    }

    /// Looks up `key` (for example `"extract/refine"`) and fills placeholders.
    pub fn render(&self, key: &str, vars: &[(&str, &str)]) -> String {
        let template = self.templates.get(key).unwrap_or_else(|| panic!("unknown prompt template {key}"));
        render(template, vars)
    }
}

/// Single-pass substitution: values are inserted verbatim and never
/// re-expanded; unknown placeholders are left as they are.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        match after.find("}}") {
            Some(close) => {
                let name = &after[..close];
                match vars.iter().find(|(k, _)| *k == name) {
                    Some((_, v)) => out.push_str(v),
                    None => {
                        out.push_str("{{");
                        out.push_str(name);
                        out.push_str("}}");
                    }
                }
                rest = &after[close + 2..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitution_is_single_pass() {
        let s = render("a {{x}} b {{y}} {{z", &[("x", "{{y}}"), ("y", "Y")]);
        assert_eq!(s, "a {{y}} b Y {{z");
    }

    #[test]
    fn builtins_have_their_placeholders() {
        let p = Prompts::builtin();
        let s = p.render("extract/extract", &[("source", "SRC"), ("candidates", "CANDS")]);
        assert!(s.contains("SRC") && s.contains("CANDS") && !s.contains("{{"));
    }

    #[test]
    fn overrides_replace_single_files() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("extract")).unwrap();
        fs::write(dir.path().join("extract/system.txt"), "custom").unwrap();
        let p = Prompts::with_overrides(dir.path()).unwrap();
        assert_eq!(p.render("extract/system", &[]), "custom");
        assert_eq!(p.render("formalize/system", &[]), Prompts::builtin().render("formalize/system", &[]));
    }
}
