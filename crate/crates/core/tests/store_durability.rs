use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use nora_core::store::{
    collections, conformance, platform_schema, DocumentStore, FileStore, FileStoreOptions, MemoryStore, Order,
    Query, StoreError, SyncMode,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

const COLLS: [&str; 3] = [collections::MESSAGES, collections::HEALTH, collections::TOPICS];

fn open(dir: &Path, compact_min_records: usize) -> FileStore {
    FileStore::open_with(
        dir,
        platform_schema(),
        FileStoreOptions {
            sync: SyncMode::Flush,
            compact_min_records,
        },
    )
    .unwrap()
}

/// Simulates a process crash: no destructors run, and a half-written
/// record may be left at the end of a log.
fn crash(store: FileStore, dir: &Path, rng: &mut StdRng) {
    std::mem::forget(store);
    if rng.gen_bool(0.5) {
        let coll = COLLS[rng.gen_range(0..COLLS.len())];
        let mut f = OpenOptions::new().append(true).open(dir.join(format!("{coll}.log"))).unwrap();
        let torn: &[u8] = match rng.gen_range(0..3) {
            0 => &[7, 0],
            1 => &[200, 0, 0, 0, b'{', b'"'],
            _ => &[5, 0, 0, 0, b'{', b'x', b'y', b'z', b'}'],
        };
        f.write_all(torn).unwrap();
    }
}

type Model = BTreeMap<(String, String), (Value, u64)>;

fn body(rng: &mut StdRng, i: usize) -> Value {
    json!({
        "user": format!("u{}", rng.gen_range(0..4)),
        "day": rng.gen_range(1..15),
        "conversation": format!("c{}", rng.gen_range(0..3)),
        "id": i,
        "text": "x".repeat(rng.gen_range(0..40)),
        "uni": "体温 37.2 ✓",
    })
}

fn check_model(store: &dyn DocumentStore, model: &Model) {
    for ((coll, key), (body, version)) in model {
        let doc = store.get(coll, key).unwrap().unwrap_or_else(|| panic!("lost {coll}/{key}"));
        assert_eq!((&doc.body, doc.version), (body, *version), "{coll}/{key}");
    }
    for coll in COLLS {
        let n = store.query(coll, &Query::new()).unwrap().len();
        let expected = model.keys().filter(|(c, _)| c == coll).count();
        assert_eq!(n, expected, "{coll} holds unacknowledged documents");
    }
}

fn crash_restart_run(seed: u64, ops: usize, compact_min_records: usize) -> usize {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut model = Model::new();
    let mut store = open(dir.path(), compact_min_records);
    let mut acked = 0;
    let mut restarts = 0;

    for i in 0..ops {
        let coll = COLLS[rng.gen_range(0..COLLS.len())];
        let key = format!("k{}", rng.gen_range(0..60));
        let id = (coll.to_string(), key.clone());
        let current = model.get(&id).map_or(0, |(_, v)| *v);
        let b = body(&mut rng, i);
        match rng.gen_range(0..10) {
            0..=4 => {
                let v = store.put(coll, &key, b.clone()).unwrap();
                assert_eq!(v, current + 1);
                model.insert(id, (b, v));
                acked += 1;
            }
            5..=7 => {
                let v = store.compare_and_put(coll, &key, current, b.clone()).unwrap();
                model.insert(id, (b, v));
                acked += 1;
            }
            8 => {
                let stale = current + 1 + rng.gen_range(0..3);
                let r = store.compare_and_put(coll, &key, stale, b);
                assert!(matches!(r, Err(StoreError::Conflict { .. })));
            }
            _ => {
                let got = store.get(coll, &key).unwrap().map(|d| (d.body, d.version));
                assert_eq!(got.as_ref(), model.get(&id));
            }
        }
        if rng.gen_bool(0.03) {
            crash(store, dir.path(), &mut rng);
            store = open(dir.path(), compact_min_records);
            restarts += 1;
            check_model(&store, &model);
        }
    }
    crash(store, dir.path(), &mut rng);
    let store = open(dir.path(), compact_min_records);
    check_model(&store, &model);
    assert!(restarts > 10, "only {restarts} restarts");
    acked
}

#[test]
fn crash_restart_retains_every_acknowledged_write() {
    assert!(crash_restart_run(1, 1000, usize::MAX) > 700);
}

#[test]
fn crash_restart_with_frequent_compaction() {
    for seed in 2..5 {
        crash_restart_run(seed, 1000, 32);
    }
}

#[test]
fn conformance_suite_on_both_stores() {
    conformance::run(&MemoryStore::platform()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    conformance::run(&FileStore::open_platform(dir.path()).unwrap()).unwrap();
}

#[test]
fn reopen_preserves_versions() {
    let dir = tempfile::tempdir().unwrap();
    {
        let s = FileStore::open_platform(dir.path()).unwrap();
        s.put(collections::USERS, "seed", json!({"alias": "x"})).unwrap();
    }
    let s = FileStore::open_platform(dir.path()).unwrap();
    assert_eq!(s.get(collections::USERS, "seed").unwrap().unwrap().version, 1);
}

/// The same operation sequence produces the same observable results on
/// both implementations.
#[test]
fn memory_and_file_stores_agree() {
    let dir = tempfile::tempdir().unwrap();
    let file = open(dir.path(), 64);
    let mem = MemoryStore::platform();
    let stores: [&dyn DocumentStore; 2] = [&mem, &file];
    let mut rng = StdRng::seed_from_u64(99);
    for i in 0..1500 {
        let coll = COLLS[rng.gen_range(0..COLLS.len())];
        let key = format!("k{}", rng.gen_range(0..40));
        let b = body(&mut rng, i);
        let expected = rng.gen_range(0..4u64);
        let user = format!("u{}", rng.gen_range(0..4));
        let op = rng.gen_range(0..4);
        let results: Vec<String> = stores
            .iter()
            .map(|s| match op {
                0 => format!("{:?}", s.put(coll, &key, b.clone()).map_err(|e| e.kind())),
                1 => format!("{:?}", s.compare_and_put(coll, &key, expected, b.clone()).map_err(|e| e.kind())),
                2 => format!("{:?}", s.get(coll, &key).unwrap()),
                _ => {
                    let q = Query::new().eq("user", user.clone()).order_by("day", Order::Desc);
                    format!("{:?}", s.query(collections::HEALTH, &q).map_err(|e| e.kind()))
                }
            })
            .collect();
        assert_eq!(results[0], results[1], "op {i}");
    }
}

/// Child half of `killed_process_keeps_acknowledged_writes`.
#[test]
fn writer_child() {
    let Ok(dir) = std::env::var("NORA_DURABILITY_CHILD_DIR") else {
        return;
    };
    let store = FileStore::open_platform(&dir).unwrap();
    let out = std::io::stdout();
    for i in 0.. {
        let v = store.put(collections::MESSAGES, &format!("m{i}"), json!({"conversation": "c", "id": i})).unwrap();
        let mut lock = out.lock();
        writeln!(lock, "ack m{i} {v}").unwrap();
        lock.flush().unwrap();
    }
}

#[test]
fn killed_process_keeps_acknowledged_writes() {
    use std::io::{BufRead, BufReader};
    use std::process::{Command, Stdio};

    let dir = tempfile::tempdir().unwrap();
    let mut child = Command::new(std::env::current_exe().unwrap())
        .args(["--exact", "writer_child", "--nocapture", "--test-threads=1"])
        .env("NORA_DURABILITY_CHILD_DIR", dir.path())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut acked = Vec::new();
    for line in BufReader::new(child.stdout.take().unwrap()).lines() {
        let line = line.unwrap();
        if let Some(rest) = line.strip_prefix("ack ") {
            acked.push(rest.split(' ').next().unwrap().to_string());
            if acked.len() == 1000 {
                break;
            }
        }
    }
    child.kill().unwrap();
    child.wait().unwrap();
    assert_eq!(acked.len(), 1000);
    let store = FileStore::open_platform(dir.path()).unwrap();
    for key in &acked {
        assert!(store.get(collections::MESSAGES, key).unwrap().is_some(), "lost {key}");
    }
}
