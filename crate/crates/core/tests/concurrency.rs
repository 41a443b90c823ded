mod common;

use std::sync::atomic::{AtomicBool, Ordering};
use std::thread;

use merlean::engine::{load_manifest, save_manifest, LoopConfig, RunManifest, RunStatus};
use merlean::lean::{init_workspace, WorkspaceConfig};
use merlean::statement::StatementId;

#[test]
fn concurrent_module_writes_register_each_import_once() {
    let dir = tempfile::tempdir().unwrap();
    let ws = init_workspace(WorkspaceConfig {
        root: dir.path().join("ws"),
        mathlib: None,
        build_command: common::standin_command(),
        ..WorkspaceConfig::default()
    })
    .unwrap();
    let ids: Vec<StatementId> = (1..=24).map(|i| StatementId::parse(&format!("Lem_{i}")).unwrap()).collect();
    thread::scope(|s| {
        for chunk in ids.chunks(3) {
            let ws = &ws;
            s.spawn(move || {
                for round in 0..4 {
                    for id in chunk {
                        ws.write_module(id, &format!("theorem t_{} : True := trivial -- {round}\n", id.as_str())).unwrap();
                    }
                }
            });
        }
    });
    let registered = ws.registered_modules().unwrap();
    let expected: Vec<String> = ids.iter().map(|id| ws.module_name(id)).collect();
    assert_eq!(registered, expected);
    for id in &ids {
        let code = ws.read_module(id).unwrap().unwrap();
        assert!(code.ends_with("-- 3\n"), "{code}");
    }
}

fn manifest(n: usize) -> RunManifest {
    RunManifest {
        schema_version: merlean::engine::manifest::SCHEMA_VERSION,
        status: RunStatus::Running,
        lib_name: "Merlean".into(),
        toolchain: "leanprover/lean4:v4.15.0".into(),
        source_fingerprint: "f".repeat(64),
        loop_config: LoopConfig::default(),
        order: (1..=n).map(|i| StatementId::parse(&format!("Def_{i}")).unwrap()).collect(),
        results: Vec::new(),
        warnings: vec!["w".repeat(n * 100)],
        extraction_wall_ms: Some(n as u64),
        formalization_wall_ms: 0,
        final_build: None,
        census: None,
    }
}

#[test]
fn manifest_saves_are_never_seen_half_written() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(".merlean/manifest.json");
    save_manifest(&path, &manifest(1)).unwrap();
    let stop = AtomicBool::new(false);
    let reads = thread::scope(|s| {
        for w in 0..4 {
            let path = &path;
            s.spawn(move || {
                for i in 0..50 {
                    save_manifest(path, &manifest(1 + (w * 50 + i) % 40)).unwrap();
                }
            });
        }
        let reader = s.spawn(|| {
            let mut reads = 0;
            while !stop.load(Ordering::SeqCst) || reads == 0 {
                let m = load_manifest(&path).expect("every observed manifest parses");
                assert_eq!(m.order.len() as u64, m.extraction_wall_ms.unwrap());
                reads += 1;
            }
            reads
        });
        // let the reader overlap the writers for a while
        thread::sleep(std::time::Duration::from_millis(200));
        stop.store(true, Ordering::SeqCst);
        reader.join().unwrap()
    });
    assert!(reads > 0);
    load_manifest(&path).unwrap();
}
