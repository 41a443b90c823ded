//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn standin_command() -> Vec<String> {
    vec!["python3".into(), fixture("lake_standin.py").to_string_lossy().into_owned(), "build".into()]
}

/// Runs the `merlean` binary with a scrubbed API key.
pub fn merlean(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_merlean"))
        .args(args)
        .env_remove("MERLEAN_API_KEY")
        .env_remove("MERLEAN_LOG")
        .output()
        .expect("binary runs")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub struct MiniRun {
    pub output: Output,
    pub workspace: PathBuf,
    pub out_dir: PathBuf,
}

/// `merlean run` over the bundled mini paper with the given backend spec.
pub fn run_mini_paper(dir: &Path, backend: &str) -> MiniRun {
    let workspace = dir.join("ws");
    let out_dir = dir.join("out");
    let tex = fixture("mini_paper/even_numbers.tex");
    let config = fixture("mini_paper/config.json");
    let output = merlean(&[
        "run",
        tex.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--backend",
        backend,
        "--workspace",
        workspace.to_str().unwrap(),
        "-o",
        out_dir.to_str().unwrap(),
    ]);
    MiniRun { output, workspace, out_dir }
}

pub fn replay_spec() -> String {
    format!("replay:{}", fixture("mini_paper/transcript.jsonl").display())
}

/// Every file under `root` (build logs excluded) keyed by relative path.
pub fn tree_bytes(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
            if rel == ".merlean/logs" {
                continue;
            }
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}
