mod common;

use std::fs;
use std::path::Path;

use merlean::lean::{is_success, parse_diagnostics, DiagSeverity, Diagnostic};
use proptest::prelude::*;
use serde::Deserialize;

#[derive(Deserialize)]
struct Expected {
    strict_success: bool,
    lenient_success: bool,
    diagnostics: Vec<ExpectedDiag>,
}

#[derive(Deserialize)]
struct ExpectedDiag {
    severity: DiagSeverity,
    file: String,
    line: usize,
    column: usize,
    anchor: String,
    message: String,
}

fn fixture_dirs() -> Vec<std::path::PathBuf> {
    let mut dirs: Vec<_> = fs::read_dir(common::fixture("diagnostics"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    dirs
}

/// Text of `file` starting at a 1-based line and codepoint column.
fn text_at(dir: &Path, file: &str, line: usize, column: usize) -> String {
    let src = fs::read_to_string(dir.join(file)).unwrap();
    let l = src.split_inclusive('\n').nth(line - 1).unwrap_or_else(|| panic!("{file} has no line {line}"));
    l.chars().skip(column - 1).collect()
}

#[test]
fn fixtures_parse_to_the_reported_positions() {
    let dirs = fixture_dirs();
    assert!(dirs.len() >= 10, "only {} fixtures", dirs.len());
    for dir in dirs {
        let name = dir.file_name().unwrap().to_string_lossy().into_owned();
        let expected: Expected = serde_json::from_slice(&fs::read(dir.join("expected.json")).unwrap()).unwrap();
        let parsed = parse_diagnostics(&fs::read(dir.join("build.log")).unwrap());
        assert_eq!(parsed.len(), expected.diagnostics.len(), "{name}: {parsed:#?}");
        for (got, want) in parsed.iter().zip(&expected.diagnostics) {
            assert_eq!(
                (got.severity, got.file.as_str(), got.line, got.column, got.message.as_str()),
                (want.severity, want.file.as_str(), want.line, want.column, want.message.as_str()),
                "{name}"
            );
            // independent check: the position points at the anchor in the source
            let at = text_at(&dir, &want.file, want.line, want.column);
            assert!(at.starts_with(&want.anchor), "{name}: {:?} is not at {}:{}", want.anchor, want.line, want.column);
        }
        assert_eq!(is_success(&parsed, true), expected.strict_success, "{name} strict");
        assert_eq!(is_success(&parsed, false), expected.lenient_success, "{name} lenient");
    }
}

#[test]
fn warning_only_fixtures_fail_strict_mode_only() {
    for name in ["sorry_warning", "unused_variable", "deprecation_and_lint"] {
        let parsed = parse_diagnostics(&fs::read(common::fixture(&format!("diagnostics/{name}/build.log"))).unwrap());
        assert!(parsed.iter().all(|d| d.severity == DiagSeverity::Warning), "{name}");
        assert!(!is_success(&parsed, true) && is_success(&parsed, false), "{name}");
    }
}

fn logs() -> Vec<Vec<u8>> {
    fixture_dirs().iter().map(|d| fs::read(d.join("build.log")).unwrap()).collect()
}

proptest! {
    // build outputs are self-delimiting: parsing a concatenation gives the
    // concatenation of the parses
    #[test]
    fn concatenated_logs_parse_piecewise(picks in proptest::collection::vec(0usize..64, 0..6)) {
        let logs = logs();
        let chosen: Vec<&Vec<u8>> = picks.iter().map(|&i| &logs[i % logs.len()]).collect();
        let joined: Vec<u8> = chosen.iter().flat_map(|l| l.iter().copied()).collect();
        let piecewise: Vec<Diagnostic> = chosen.iter().flat_map(|l| parse_diagnostics(l)).collect();
        prop_assert_eq!(parse_diagnostics(&joined), piecewise);
    }
}
