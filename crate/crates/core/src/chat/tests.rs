use std::collections::BTreeMap;
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::*;
use crate::dialogue::ActivityPreferences;
use crate::lang::Language;
use crate::profile::{Program, UserProfile};
use crate::store::MemoryStore;

struct Fixture {
    chat: Arc<ChatService>,
    push: Arc<MemoryPush>,
    conf: Arc<SimulatedConference>,
}

fn fixture(users: &[(&str, &str)]) -> Fixture {
    let store: Arc<dyn DocumentStore> = Arc::new(MemoryStore::platform());
    for (id, alias) in users {
        profile::create(
            &*store,
            &UserProfile {
                id: id.to_string(),
                alias: alias.to_string(),
                language: Language::En,
                program: Program::default(),
                activity: ActivityPreferences::default(),
                credential: String::new(),
            },
        )
        .unwrap();
    }
    let push = Arc::new(MemoryPush::new());
    let conf = Arc::new(SimulatedConference::new());
    let chat = Arc::new(ChatService::new(store, push.clone(), conf.clone(), ChatConfig::default()));
    Fixture { chat, push, conf }
}

fn abc() -> Fixture {
    fixture(&[("a", "ant"), ("b", "bee"), ("c", "cat")])
}

fn topics(ts: &[&str]) -> Vec<String> {
    ts.iter().map(|t| t.to_string()).collect()
}

#[test]
fn friendship_is_symmetric() {
    let f = abc();
    let c = f.chat.add_friend("a", "bee").unwrap();
    assert_eq!(c, Contact { user: "b".into(), alias: "bee".into() });
    assert_eq!(f.chat.contacts("a").unwrap(), vec![c]);
    assert_eq!(f.chat.contacts("b").unwrap(), vec![Contact { user: "a".into(), alias: "ant".into() }]);
    assert!(matches!(f.chat.add_friend("a", "ant"), Err(ChatError::InvalidInput(_))));
    assert!(matches!(f.chat.add_friend("a", "yak"), Err(ChatError::NotFound(_))));
    f.chat.add_friend("b", "ant").unwrap();
    assert_eq!(f.chat.contacts("a").unwrap().len(), 1);
}

#[test]
fn direct_messages_are_sequenced_and_notified() {
    let f = abc();
    f.chat.add_friend("a", "bee").unwrap();
    assert_eq!(f.chat.send_direct("a", "b", "hi").unwrap(), 1);
    assert_eq!(f.push.sent().len(), 1);
    assert_eq!(f.chat.send_direct("b", "a", "hello").unwrap(), 2);
    let n = f.push.drain("b");
    assert_eq!(n, vec![Notification { recipient: "b".into(), conversation: ConversationRef::direct("a", "b"), hint: 1 }]);
    assert!(matches!(f.chat.send_direct("a", "c", "psst"), Err(ChatError::Forbidden(_))));
    assert!(matches!(f.chat.send_direct("a", "b", "  "), Err(ChatError::InvalidInput(_))));
}

#[test]
fn sync_follows_cursor() {
    let f = abc();
    f.chat.add_friend("a", "bee").unwrap();
    for i in 1..=5 {
        f.chat.send_direct("a", "b", &format!("m{i}")).unwrap();
    }
    let conv = ConversationRef::direct("a", "b");
    let r = f.chat.sync("b", &conv, 3).unwrap();
    assert_eq!(r.messages.iter().map(|m| m.body.as_str()).collect::<Vec<_>>(), ["m4", "m5"]);
    assert_eq!(r.cursor.last_seen, 5);
    let r = f.chat.sync("b", &conv, 5).unwrap();
    assert!(r.messages.is_empty());
    assert_eq!(r.cursor.last_seen, 5);
    assert!(matches!(f.chat.sync("b", &conv, 9), Err(ChatError::InvalidInput(_))));
    assert!(matches!(f.chat.sync("c", &conv, 0), Err(ChatError::Forbidden(_))));
}

#[test]
fn interests_drive_subscriptions() {
    let f = abc();
    let d = f.chat.set_interests("a", &topics(&["movies"])).unwrap();
    assert_eq!(d, SubscriptionDiff { added: topics(&["movies"]), removed: vec![] });
    let d = f.chat.set_interests("a", &topics(&["movies", "cooking"])).unwrap();
    assert_eq!(d, SubscriptionDiff { added: topics(&["cooking"]), removed: vec![] });
    assert_eq!(f.chat.interests("a").unwrap(), topics(&["movies", "cooking"]));
    assert!(matches!(f.chat.set_interests("a", &topics(&["golf"])), Err(ChatError::InvalidInput(_))));
    assert!(matches!(f.chat.set_interests("zz", &topics(&[])), Err(ChatError::NotFound(_))));

    f.chat.set_interests("b", &topics(&["movies"])).unwrap();
    f.chat.post_topic("b", "movies", "anyone seen it?").unwrap();
    assert_eq!(f.push.drain("a").len(), 1);
    let d = f.chat.set_interests("a", &topics(&[])).unwrap();
    assert_eq!(d.removed, topics(&["movies", "cooking"]));
    f.chat.post_topic("b", "movies", "hello?").unwrap();
    assert!(f.push.drain("a").is_empty());
    assert!(matches!(f.chat.sync("a", &ConversationRef::topic("movies"), 0), Err(ChatError::Forbidden(_))));
    f.chat.set_interests("a", &topics(&["movies"])).unwrap();
    assert_eq!(f.chat.sync("a", &ConversationRef::topic("movies"), 0).unwrap().messages.len(), 2);
}

#[test]
fn topic_posts_fan_out_anonymously() {
    let f = abc();
    for u in ["a", "b", "c"] {
        f.chat.set_interests(u, &topics(&["music"])).unwrap();
    }
    let id = f.chat.post_topic("a", "music", "favourite album?").unwrap();
    let mut recipients: Vec<_> = f.push.sent().into_iter().map(|n| n.recipient).collect();
    recipients.sort();
    assert_eq!(recipients, ["b", "c"]);
    let r = f.chat.sync("b", &ConversationRef::topic("music"), 0).unwrap();
    let m = &r.messages[0];
    assert_eq!(m.id, id);
    assert_eq!(m.sender, pseudonym("nora", "music", "a"));
    let payload = serde_json::to_string(&r).unwrap() + &serde_json::to_string(&f.push.sent()).unwrap();
    assert!(!payload.contains("\"a\"") && !payload.contains("ant"));
    assert!(matches!(f.chat.post_topic("a", "cooking", "x"), Err(ChatError::Forbidden(_))));
    assert!(matches!(f.chat.post_topic("a", "golf", "x"), Err(ChatError::NotFound(_))));
}

#[test]
fn meetings_are_created_once() {
    let f = abc();
    let first = f.chat.get_or_create_meeting("movies").unwrap();
    assert_eq!(f.conf.create_calls(), 1);
    assert_eq!(f.chat.get_or_create_meeting("movies").unwrap(), first);
    assert_eq!(f.conf.create_calls(), 1);
    assert!(matches!(f.chat.get_or_create_meeting("golf"), Err(ChatError::NotFound(_))));
}

#[test]
fn failed_meeting_creation_stores_nothing() {
    let f = abc();
    f.conf.fail_next();
    assert!(matches!(f.chat.get_or_create_meeting("music"), Err(ChatError::Provider(_))));
    let m = f.chat.get_or_create_meeting("music").unwrap();
    assert_eq!(f.conf.create_calls(), 2);
    assert!(m.join_url.starts_with("https://"));
}

#[test]
fn concurrent_meeting_requests_create_once() {
    let f = abc();
    let urls: Vec<String> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..50)
            .map(|_| {
                let chat = f.chat.clone();
                s.spawn(move || chat.get_or_create_meeting("cooking").unwrap().join_url)
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert_eq!(f.conf.create_calls(), 1);
    assert!(urls.iter().all(|u| u == &urls[0]));
}

#[test]
fn reports_are_idempotent() {
    let f = abc();
    f.chat.add_friend("a", "bee").unwrap();
    f.chat.send_direct("a", "b", "rude").unwrap();
    let conv = ConversationRef::direct("a", "b");
    let r1 = f.chat.report_message("b", &conv, 1, "spam").unwrap();
    let r2 = f.chat.report_message("b", &conv, 1, "spam again").unwrap();
    assert_eq!(r1, r2);
    assert_eq!(f.chat.reports_by("b").unwrap().len(), 1);
    assert!(f.chat.is_flagged(&conv, 1).unwrap());
    assert!(matches!(f.chat.report_message("c", &conv, 1, "x"), Err(ChatError::NotFound(_))));
    assert!(matches!(f.chat.report_message("b", &conv, 7, "x"), Err(ChatError::NotFound(_))));
}

#[test]
fn conversation_ids_roundtrip() {
    for c in [ConversationRef::direct("z", "a"), ConversationRef::topic("movies")] {
        assert_eq!(c.to_string().parse::<ConversationRef>().unwrap(), c);
    }
    assert_eq!(ConversationRef::direct("z", "a").to_string(), "direct:a|z");
    for bad in ["", "direct:a", "direct:a|a", "topic:", "dm:a|b"] {
        assert!(bad.parse::<ConversationRef>().is_err(), "{bad}");
    }
}

#[test]
fn concurrent_appends_get_dense_ids() {
    let f = abc();
    f.chat.set_interests("a", &topics(&["movies"])).unwrap();
    f.chat.set_interests("b", &topics(&["movies"])).unwrap();
    std::thread::scope(|s| {
        for u in ["a", "b", "a", "b"] {
            let chat = f.chat.clone();
            s.spawn(move || {
                for i in 0..25 {
                    chat.post_topic(u, "movies", &format!("{u}{i}")).unwrap();
                }
            });
        }
    });
    let r = f.chat.sync("a", &ConversationRef::topic("movies"), 0).unwrap();
    assert_eq!(r.messages.iter().map(|m| m.id).collect::<Vec<_>>(), (1..=100).collect::<Vec<_>>());
}

#[test]
fn fresh_service_continues_existing_log() {
    let store: Arc<dyn DocumentStore> = Arc::new(MemoryStore::platform());
    for (id, alias) in [("a", "ant"), ("b", "bee")] {
        profile::create(
            &*store,
            &UserProfile {
                id: id.into(),
                alias: alias.into(),
                language: Language::En,
                program: Program::default(),
                activity: ActivityPreferences::default(),
                credential: String::new(),
            },
        )
        .unwrap();
    }
    let mk = || ChatService::new(store.clone(), Arc::new(MemoryPush::new()), Arc::new(SimulatedConference::new()), ChatConfig::default());
    let one = mk();
    one.add_friend("a", "bee").unwrap();
    one.send_direct("a", "b", "1").unwrap();
    one.send_direct("a", "b", "2").unwrap();
    assert_eq!(mk().send_direct("b", "a", "3").unwrap(), 3);
}

/// Clients that only learn about messages through a lossy, duplicating
/// channel still end up with the server's log after a final sync.
#[test]
fn lossy_notifications_still_converge() {
    let users = [("a", "ant"), ("b", "bee"), ("c", "cat"), ("d", "dog")];
    let f = fixture(&users);
    let ids: Vec<&str> = users.iter().map(|u| u.0).collect();
    f.chat.add_friend("a", "bee").unwrap();
    f.chat.add_friend("c", "dog").unwrap();
    f.chat.add_friend("a", "dog").unwrap();
    let mut rng = StdRng::seed_from_u64(11);
    let catalog = ["movies", "cooking", "music"];
    // (user, conversation) -> materialized log
    let mut clients: BTreeMap<(String, String), Vec<ChatMessage>> = BTreeMap::new();
    let client_sync = |clients: &mut BTreeMap<(String, String), Vec<ChatMessage>>, user: &str, conv: &ConversationRef| {
        let log = clients.entry((user.to_string(), conv.to_string())).or_default();
        let last = log.last().map_or(0, |m| m.id);
        if let Ok(r) = f.chat.sync(user, conv, last) {
            for m in r.messages {
                assert_eq!(m.id, log.last().map_or(0, |x| x.id) + 1, "ordering");
                log.push(m);
            }
        }
    };
    for step in 0..300 {
        let u = ids[rng.gen_range(0..ids.len())];
        match rng.gen_range(0..10) {
            0 => {
                let picked: Vec<String> =
                    catalog.iter().filter(|_| rng.gen_bool(0.6)).map(|t| t.to_string()).collect();
                f.chat.set_interests(u, &picked).unwrap();
            }
            1..=4 => {
                let contacts = f.chat.contacts(u).unwrap();
                if !contacts.is_empty() {
                    let to = &contacts[rng.gen_range(0..contacts.len())].user;
                    f.chat.send_direct(u, to, &format!("dm {step}")).unwrap();
                }
            }
            _ => {
                let t = catalog[rng.gen_range(0..catalog.len())];
                let _ = f.chat.post_topic(u, t, &format!("post {step}"));
            }
        }
        for r in &ids {
            for n in f.push.drain(r) {
                if rng.gen_bool(0.2) {
                    continue;
                }
                let copies = if rng.gen_bool(0.1) { 2 } else { 1 };
                for _ in 0..copies {
                    client_sync(&mut clients, r, &n.conversation);
                }
            }
        }
    }
    for u in &ids {
        for conv in f.chat.conversations(u).unwrap() {
            client_sync(&mut clients, u, &conv);
            let server = f.chat.sync(u, &conv, 0).unwrap().messages;
            assert_eq!(clients[&(u.to_string(), conv.to_string())], server, "{u} {conv}");
        }
    }
}
