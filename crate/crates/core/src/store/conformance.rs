//! Behavioural suite every [`DocumentStore`] implementation must pass.
//!
//! The store under test must declare the platform schema
//! ([`super::platform_schema`]) and start empty.

use serde_json::{json, Value};

use super::{collections, modify, DocumentStore, Order, Query, StoreError};

pub type Check = fn(&dyn DocumentStore) -> Result<(), String>;

/// Named checks, in execution order.
pub fn checks() -> Vec<(&'static str, Check)> {
    vec![
        ("put_then_get", put_then_get as Check),
        ("versions_increment", versions_increment),
        ("stale_compare_and_put_conflicts", stale_compare_and_put_conflicts),
        ("create_only_with_version_zero", create_only_with_version_zero),
        ("query_matches_linear_scan", query_matches_linear_scan),
        ("unknown_collection_rejected", unknown_collection_rejected),
        ("unindexed_query_rejected", unindexed_query_rejected),
        ("concurrent_counter_loses_nothing", concurrent_counter_loses_nothing),
    ]
}

/// Runs every check, returning the names of failed checks with reasons.
pub fn run(store: &dyn DocumentStore) -> Result<(), Vec<String>> {
    let failures: Vec<String> = checks()
        .into_iter()
        .filter_map(|(name, check)| check(store).err().map(|e| format!("{name}: {e}")))
        .collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(failures)
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: StoreError) -> String {
    e.to_string()
}

fn put_then_get(s: &dyn DocumentStore) -> Result<(), String> {
    let body = json!({"alias": "bee", "nested": {"xs": [1, 2, 3]}});
    let v = s.put(collections::USERS, "conf-put", body.clone()).map_err(err)?;
    ensure(v == 1, || format!("first version {v}, want 1"))?;
    let doc = s
        .get(collections::USERS, "conf-put")
        .map_err(err)?
        .ok_or("document missing after put")?;
    ensure(doc.body == body, || format!("body {:?}", doc.body))?;
    ensure(doc.version == 1, || format!("version {}", doc.version))?;
    ensure(
        s.get(collections::USERS, "conf-absent").map_err(err)?.is_none(),
        || "absent key returned a document".into(),
    )
}

fn versions_increment(s: &dyn DocumentStore) -> Result<(), String> {
    for want in 1..=5u64 {
        let v = s.put(collections::TOPICS, "conf-ver", json!(want)).map_err(err)?;
        ensure(v == want, || format!("write {want} got version {v}"))?;
    }
    Ok(())
}

fn stale_compare_and_put_conflicts(s: &dyn DocumentStore) -> Result<(), String> {
    let v1 = s.put(collections::TOPICS, "conf-cas", json!("one")).map_err(err)?;
    let v2 = s
        .compare_and_put(collections::TOPICS, "conf-cas", v1, json!("two"))
        .map_err(err)?;
    ensure(v2 == v1 + 1, || format!("cas version {v2}"))?;
    match s.compare_and_put(collections::TOPICS, "conf-cas", v1, json!("three")) {
        Err(StoreError::Conflict { actual, .. }) => {
            ensure(actual == v2, || format!("conflict reports version {actual}"))?
        }
        other => return Err(format!("stale cas returned {other:?}")),
    }
    let doc = s.get(collections::TOPICS, "conf-cas").map_err(err)?.ok_or("missing")?;
    ensure(doc.body == json!("two") && doc.version == v2, || {
        format!("body changed by failed cas: {:?}", doc)
    })
}

fn create_only_with_version_zero(s: &dyn DocumentStore) -> Result<(), String> {
    let v = s
        .compare_and_put(collections::MEETINGS, "conf-new", 0, json!(1))
        .map_err(err)?;
    ensure(v == 1, || format!("create version {v}"))?;
    match s.compare_and_put(collections::MEETINGS, "conf-new", 0, json!(2)) {
        Err(StoreError::Conflict { .. }) => Ok(()),
        other => Err(format!("second create returned {other:?}")),
    }
}

fn query_matches_linear_scan(s: &dyn DocumentStore) -> Result<(), String> {
    // Insert days out of order for two users.
    for day in [3, 1, 5, 2, 4] {
        for user in ["conf-a", "conf-b"] {
            s.put(
                collections::SESSIONS,
                &format!("{user}/{day}"),
                json!({"user": user, "day": day, "phase": "End"}),
            )
            .map_err(err)?;
        }
    }
    let got = s
        .query(
            collections::SESSIONS,
            &Query::new().eq("user", "conf-a").order_by("day", Order::Asc),
        )
        .map_err(err)?;

    // Oracle: visit every key we could have written and filter by hand.
    let mut expected: Vec<(i64, Value)> = Vec::new();
    for day in 1..=5 {
        for user in ["conf-a", "conf-b"] {
            if let Some(d) = s.get(collections::SESSIONS, &format!("{user}/{day}")).map_err(err)? {
                if d.body["user"] == json!("conf-a") {
                    expected.push((d.body["day"].as_i64().unwrap_or(-1), d.body));
                }
            }
        }
    }
    expected.sort_by_key(|(day, _)| *day);

    ensure(got.len() == 5, || format!("{} results, want 5", got.len()))?;
    let got_bodies: Vec<&Value> = got.iter().map(|d| &d.body).collect();
    let want_bodies: Vec<&Value> = expected.iter().map(|(_, b)| b).collect();
    ensure(got_bodies == want_bodies, || {
        format!("query {got_bodies:?} != scan {want_bodies:?}")
    })
}

fn unknown_collection_rejected(s: &dyn DocumentStore) -> Result<(), String> {
    match s.put("no-such-collection", "k", json!(1)) {
        Err(StoreError::UnknownCollection(_)) => {}
        other => return Err(format!("put returned {other:?}")),
    }
    match s.get("no-such-collection", "k") {
        Err(StoreError::UnknownCollection(_)) => Ok(()),
        other => Err(format!("get returned {other:?}")),
    }
}

fn unindexed_query_rejected(s: &dyn DocumentStore) -> Result<(), String> {
    match s.query(collections::SESSIONS, &Query::new().eq("phase", "End")) {
        Err(StoreError::NotIndexed { .. }) => Ok(()),
        other => Err(format!("query returned {other:?}")),
    }
}

fn concurrent_counter_loses_nothing(s: &dyn DocumentStore) -> Result<(), String> {
    const THREADS: u64 = 8;
    const INCREMENTS: u64 = 50;
    s.put(collections::TOPICS, "conf-counter", json!(0)).map_err(err)?;
    let results: Vec<Result<(), String>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..THREADS)
            .map(|_| {
                scope.spawn(move || {
                    for _ in 0..INCREMENTS {
                        modify::<_, _, StoreError>(s, collections::TOPICS, "conf-counter", |cur| {
                            Ok(json!(cur.and_then(Value::as_u64).unwrap_or(0) + 1))
                        })
                        .map_err(err)?;
                    }
                    Ok(())
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err("writer panicked".into())))
            .collect()
    });
    results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let doc = s.get(collections::TOPICS, "conf-counter").map_err(err)?.ok_or("missing")?;
    let want = THREADS * INCREMENTS;
    ensure(doc.body == json!(want), || format!("counter {} want {want}", doc.body))?;
    ensure(doc.version == want + 1, || format!("version {}", doc.version))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{FileStore, MemoryStore};

    #[test]
    fn memory_store_passes() {
        run(&MemoryStore::platform()).unwrap();
    }

    #[test]
    fn file_store_passes() {
        let dir = tempfile::tempdir().unwrap();
        run(&FileStore::open_platform(dir.path()).unwrap()).unwrap();
    }
}
