//! Scripted multi-day sessions and a lossy chat swarm against one
//! in-process platform, with the invariants checked along the way.
//!
//! Program trace: every user runs one session per day. Afterwards each
//! user must have exactly one health record and one summary per day, day 1
//! must open with the introduction and later days with the plans question,
//! consecutive openings must differ, and every escalated day must have
//! shown the hotline.
//!
//! Chat swarm: users send direct messages and topic posts while changing
//! interests. Notifications go through a channel that drops, duplicates and
//! delays them. Clients sync on each notification they receive and once
//! more at the end. Every client log must then equal the server log, the
//! pushed notifications must equal the recomputed fan-out, and no client may
//! see a gap or reordering.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;
use std::time::Instant;

use nora_core::chat::{pseudonym, ChatMessage, ConversationRef, Notification, PushChannel};
use nora_core::dialogue::session::{load_session, summaries};
use nora_core::dialogue::Phase;
use nora_core::profile::Program;
use nora_core::screening::history;
use nora_core::config::PlatformConfig;
use nora_core::{ErrorKind, Language};
use parking_lot::Mutex;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{GatewayError, GatewayResult};
use crate::platform::{Platform, RegisterRequest, Services, TurnRequest};

pub const DEFAULT_SCRIPT: &str = include_str!("../scripts/default.toml");

/// Bound on user turns per session; a session still open after this many
/// is a violation.
pub const MAX_SESSION_TURNS: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Answers {
    pub intro: Vec<String>,
    pub future_plans: Vec<String>,
    pub mood: Vec<String>,
    pub temperature: Vec<String>,
    pub breath_count: Vec<String>,
    pub breath_short: Vec<String>,
    pub gratitude: Vec<String>,
    pub activity_offer: Vec<String>,
    pub feedback: Vec<String>,
}

impl Answers {
    fn lists(&self) -> [(&'static str, &Vec<String>); 9] {
        [
            ("intro", &self.intro),
            ("future_plans", &self.future_plans),
            ("mood", &self.mood),
            ("temperature", &self.temperature),
            ("breath_count", &self.breath_count),
            ("breath_short", &self.breath_short),
            ("gratitude", &self.gratitude),
            ("activity_offer", &self.activity_offer),
            ("feedback", &self.feedback),
        ]
    }

    fn get(&self, key: &str) -> &[String] {
        self.lists().into_iter().find(|(k, _)| *k == key).map_or(&[], |(_, v)| v.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChatScript {
    pub users: usize,
    /// How many of the configured topics to use.
    pub topics: usize,
    pub messages: usize,
    pub drop_rate: f64,
    pub duplicate_rate: f64,
    /// Chance that queued notifications wait for a later step.
    pub delay_rate: f64,
    /// One user changes interests every this many messages; 0 disables.
    pub interest_change_every: usize,
}

impl Default for ChatScript {
    fn default() -> Self {
        Self {
            users: 5,
            topics: 3,
            messages: 500,
            drop_rate: 0.2,
            duplicate_rate: 0.1,
            delay_rate: 0.3,
            interest_change_every: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Script {
    #[serde(default)]
    pub seed: u64,
    pub answers: BTreeMap<Language, Answers>,
    #[serde(default)]
    pub chat: ChatScript,
}

impl Script {
    pub fn parse(doc: &str) -> GatewayResult<Self> {
        let s: Self = toml::from_str(doc).map_err(|e| GatewayError::invalid(format!("script: {e}")))?;
        for lang in Language::ALL {
            let a = s
                .answers
                .get(&lang)
                .ok_or_else(|| GatewayError::invalid(format!("script: no answers for {lang}")))?;
            if let Some((k, _)) = a.lists().into_iter().find(|(_, v)| v.is_empty()) {
                return Err(GatewayError::invalid(format!("script: answers.{lang}.{k} is empty")));
            }
        }
        let c = &s.chat;
        for (name, r) in [
            ("drop_rate", c.drop_rate),
            ("duplicate_rate", c.duplicate_rate),
            ("delay_rate", c.delay_rate),
        ] {
            if !(0.0..1.0).contains(&r) {
                return Err(GatewayError::invalid(format!("script: chat.{name} must be in [0, 1)")));
            }
        }
        if c.messages > 0 && c.users < 2 {
            return Err(GatewayError::invalid("script: chat needs at least 2 users"));
        }
        Ok(s)
    }

    pub fn shipped() -> Self {
        Self::parse(DEFAULT_SCRIPT).expect("shipped script parses")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOptions {
    pub days: u32,
    pub users: usize,
    pub script: Script,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProgramReport {
    pub users: usize,
    pub days: u32,
    pub sessions_completed: usize,
    pub user_turns: usize,
    pub max_session_turns: usize,
    pub health_records: usize,
    pub summaries: usize,
    pub escalated_days: usize,
    pub hotlines_shown: usize,
    pub activities_started: usize,
    /// Opening template per user and day.
    pub openings: Vec<Vec<String>>,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChatReport {
    pub users: usize,
    pub topics: usize,
    pub messages_sent: usize,
    pub direct_messages: usize,
    pub topic_posts: usize,
    pub interest_changes: usize,
    pub notifications_pushed: usize,
    pub notifications_expected: usize,
    pub dropped: usize,
    pub duplicated: usize,
    pub delivered: usize,
    pub syncs: usize,
    /// Deliveries for topics the recipient had left by then.
    pub stale_notifications: usize,
    pub ordering_violations: usize,
    pub log_mismatches: usize,
    pub fanout_matches: bool,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub program: ProgramReport,
    pub chat: ChatReport,
    /// Violation count over both parts.
    pub violations: usize,
    pub passed: bool,
    pub elapsed_ms: u64,
}

/// Push channel that records every notification, then drops, duplicates
/// or queues it.
struct LossyPush {
    state: Mutex<LossyState>,
}

struct LossyState {
    rng: StdRng,
    drop_rate: f64,
    duplicate_rate: f64,
    sent: Vec<Notification>,
    queue: Vec<Notification>,
    dropped: usize,
    duplicated: usize,
}

impl LossyPush {
    fn new(seed: u64, drop_rate: f64, duplicate_rate: f64) -> Self {
        Self {
            state: Mutex::new(LossyState {
                rng: StdRng::seed_from_u64(seed),
                drop_rate,
                duplicate_rate,
                sent: Vec::new(),
                queue: Vec::new(),
                dropped: 0,
                duplicated: 0,
            }),
        }
    }

    fn take_queue(&self) -> Vec<Notification> {
        std::mem::take(&mut self.state.lock().queue)
    }
}

impl PushChannel for LossyPush {
    fn push(&self, n: Notification) {
        let mut guard = self.state.lock();
        let s = &mut *guard;
        s.sent.push(n.clone());
        if s.rng.gen_bool(s.drop_rate) {
            s.dropped += 1;
            return;
        }
        if s.rng.gen_bool(s.duplicate_rate) {
            s.duplicated += 1;
            s.queue.push(n.clone());
        }
        s.queue.push(n);
    }
}

const PASSWORD: &str = "simulation-pass";

fn register(p: &Platform, alias: &str, language: Language, days: u32) -> GatewayResult<String> {
    let token = p.register(&RegisterRequest {
        alias: alias.into(),
        password: PASSWORD.into(),
        language,
        program: Some(Program {
            name: "simulation".into(),
            days,
        }),
    })?;
    Ok(token.user)
}

/// Runs both parts on a fresh in-memory platform built from `config`.
pub fn run(config: &PlatformConfig, opts: &SimulationOptions) -> GatewayResult<SimulationReport> {
    if opts.days == 0 {
        return Err(GatewayError::invalid("days must be at least 1"));
    }
    let started = Instant::now();
    let c = &opts.script.chat;
    let push = Arc::new(LossyPush::new(opts.script.seed, c.drop_rate, c.duplicate_rate));
    let platform = Platform::new(config.clone(), Services::in_memory(push.clone()))?;
    let program = run_program(&platform, opts)?;
    let chat = run_chat(&platform, &push, &opts.script)?;
    let violations = program.violations.len() + chat.violations.len();
    Ok(SimulationReport {
        program,
        chat,
        violations,
        passed: violations == 0,
        elapsed_ms: started.elapsed().as_millis() as u64,
    })
}

fn phase_key(phase: Phase, awaiting_breath_follow_up: bool) -> &'static str {
    match phase {
        Phase::Intro => "intro",
        Phase::FuturePlans => "future_plans",
        Phase::Mood => "mood",
        Phase::Temperature => "temperature",
        Phase::Breath if awaiting_breath_follow_up => "breath_short",
        Phase::Breath => "breath_count",
        Phase::Gratitude => "gratitude",
        Phase::ActivityOffer => "activity_offer",
        Phase::ActivityRunning => "activity_running",
        Phase::Feedback => "feedback",
        Phase::End => "end",
    }
}

fn run_program(p: &Platform, opts: &SimulationOptions) -> GatewayResult<ProgramReport> {
    let mut r = ProgramReport {
        users: opts.users,
        days: opts.days,
        ..Default::default()
    };
    let mut users = Vec::new();
    for u in 0..opts.users {
        let lang = Language::ALL[u % Language::ALL.len()];
        users.push((register(p, &format!("sim-user-{u}"), lang, opts.days)?, lang));
        r.openings.push(Vec::new());
    }
    let store = &**p.store();
    for day in 1..=opts.days {
        for (u, (user, lang)) in users.iter().enumerate() {
            let answers = &opts.script.answers[lang];
            let opening = p.start_session(user, day)?;
            let expected = if day == 1 { Phase::Intro } else { Phase::FuturePlans };
            if opening.phase != expected || !opening.response.variant.starts_with(phase_key(expected, false)) {
                r.violations.push(format!(
                    "user {u} day {day}: opened with {:?} ({})",
                    opening.phase, opening.response.variant
                ));
            }
            r.openings[u].push(opening.response.variant.clone());

            let mut attempts: HashMap<&str, usize> = HashMap::new();
            let mut turns = 0;
            loop {
                let (state, _) = load_session(store, user, day)?
                    .ok_or_else(|| GatewayError::new(ErrorKind::Storage, "session vanished"))?;
                if state.phase == Phase::End {
                    break;
                }
                if turns >= MAX_SESSION_TURNS {
                    r.violations.push(format!("user {u} day {day}: still in {:?} after {turns} turns", state.phase));
                    break;
                }
                turns += 1;
                if state.phase == Phase::ActivityRunning {
                    p.resume(user)?;
                    continue;
                }
                let key = phase_key(state.phase, state.breath_count.is_some());
                let list = answers.get(key);
                let n = attempts.entry(key).or_default();
                let text = &list[(day as usize + u + *n) % list.len()];
                *n += 1;
                p.turn(user, &TurnRequest::text(text.clone()))?;
            }
            r.user_turns += turns;
            r.max_session_turns = r.max_session_turns.max(turns);
        }
    }

    for (u, (user, _)) in users.iter().enumerate() {
        let records = history(store, user)?;
        let sums = summaries(store, user)?;
        r.health_records += records.len();
        r.summaries += sums.len();
        let record_days: Vec<u32> = records.iter().map(|h| h.day).collect();
        let summary_days: Vec<u32> = sums.iter().map(|s| s.day).collect();
        let all: Vec<u32> = (1..=opts.days).collect();
        if record_days != all {
            r.violations.push(format!("user {u}: health records for days {record_days:?}"));
        }
        if summary_days != all {
            r.violations.push(format!("user {u}: summaries for days {summary_days:?}"));
        }
        for s in &sums {
            if let Some(h) = records.iter().find(|h| h.day == s.day) {
                if h != &s.health {
                    r.violations.push(format!("user {u} day {}: summary and health record differ", s.day));
                }
            }
        }
        for day in 1..=opts.days {
            let (state, _) = load_session(store, user, day)?
                .ok_or_else(|| GatewayError::new(ErrorKind::Storage, "session vanished"))?;
            if state.phase == Phase::End {
                r.sessions_completed += 1;
            }
            if state.facts.chosen_activity.is_some() {
                r.activities_started += 1;
            }
            if state.hotline_shown {
                r.hotlines_shown += 1;
            }
            if records.iter().any(|h| h.day == day && h.escalated) {
                r.escalated_days += 1;
                if !state.hotline_shown {
                    r.violations.push(format!("user {u} day {day}: escalated without the hotline"));
                }
            }
            if day > 1 {
                let texts = |d: u32| -> GatewayResult<String> {
                    Ok(load_session(store, user, d)?
                        .and_then(|(s, _)| s.turn_history.first().map(|t| t.text.clone()))
                        .unwrap_or_default())
                };
                if texts(day)? == texts(day - 1)? {
                    r.violations.push(format!("user {u}: days {} and {day} open identically", day - 1));
                }
            }
        }
    }
    Ok(r)
}

/// One client's view of the chat.
#[derive(Default)]
struct Client {
    logs: HashMap<ConversationRef, Vec<ChatMessage>>,
}

impl Client {
    fn cursor(&self, conv: &ConversationRef) -> u64 {
        self.logs.get(conv).and_then(|l| l.last()).map_or(0, |m| m.id)
    }
}

/// Syncs `conv` for `user`, appending to the client log and counting any
/// gap or reordering. Returns false when the user may not read `conv`.
fn client_sync(
    p: &Platform,
    user: &str,
    client: &mut Client,
    conv: &ConversationRef,
    r: &mut ChatReport,
) -> GatewayResult<bool> {
    let cursor = client.cursor(conv);
    let res = match p.sync(user, conv, cursor) {
        Ok(res) => res,
        Err(e) if e.kind == ErrorKind::Forbidden => return Ok(false),
        Err(e) => return Err(e),
    };
    r.syncs += 1;
    let mut expect = cursor + 1;
    for m in &res.messages {
        if m.id != expect || &m.conversation != conv {
            r.ordering_violations += 1;
        }
        expect = m.id + 1;
    }
    if res.cursor.last_seen != expect - 1 {
        r.ordering_violations += 1;
    }
    client.logs.entry(conv.clone()).or_default().extend(res.messages);
    Ok(true)
}

fn deliver_all(
    p: &Platform,
    push: &LossyPush,
    clients: &mut HashMap<String, Client>,
    rng: &mut StdRng,
    r: &mut ChatReport,
) -> GatewayResult<()> {
    let mut batch = push.take_queue();
    batch.shuffle(rng);
    for n in batch {
        r.delivered += 1;
        let client = clients.get_mut(&n.recipient).expect("recipient is a simulated client");
        // A notification for something already synced needs no fetch.
        if client.cursor(&n.conversation) >= n.hint {
            continue;
        }
        if !client_sync(p, &n.recipient, client, &n.conversation, r)? {
            r.stale_notifications += 1;
        }
    }
    Ok(())
}

type NoteKey = (String, String, u64);

fn run_chat(p: &Platform, push: &LossyPush, script: &Script) -> GatewayResult<ChatReport> {
    let c = &script.chat;
    let topics: Vec<String> = p.topics().iter().take(c.topics).map(|t| t.id.clone()).collect();
    let mut r = ChatReport {
        users: c.users,
        topics: topics.len(),
        ..Default::default()
    };
    if c.messages == 0 {
        r.fanout_matches = true;
        return Ok(r);
    }
    let mut rng = StdRng::seed_from_u64(script.seed ^ 0x5eed);
    let mut users = Vec::new();
    for i in 0..c.users {
        users.push(register(p, &format!("chat-user-{i}"), Language::En, 14)?);
    }
    for i in 0..c.users {
        for j in i + 1..c.users {
            p.add_contact(&users[i], &format!("chat-user-{j}"))?;
        }
    }
    let mut subs: BTreeMap<String, BTreeSet<String>> = topics.iter().map(|t| (t.clone(), BTreeSet::new())).collect();
    let random_interests = |rng: &mut StdRng| -> Vec<String> {
        topics.iter().filter(|_| rng.gen_bool(0.6)).cloned().collect()
    };
    let set_interests = |user: &str, chosen: Vec<String>, subs: &mut BTreeMap<String, BTreeSet<String>>| {
        p.set_interests(user, &chosen)?;
        for (t, s) in subs.iter_mut() {
            if chosen.contains(t) {
                s.insert(user.to_string());
            } else {
                s.remove(user);
            }
        }
        GatewayResult::Ok(())
    };
    for u in &users {
        let chosen = random_interests(&mut rng);
        set_interests(u, chosen, &mut subs)?;
    }

    let mut clients: HashMap<String, Client> = users.iter().map(|u| (u.clone(), Client::default())).collect();
    let mut expected_notes: Vec<NoteKey> = Vec::new();
    // Accepted messages per conversation: (author, body).
    let mut accepted: HashMap<ConversationRef, Vec<(String, String)>> = HashMap::new();

    for m in 0..c.messages {
        if c.interest_change_every > 0 && m > 0 && m % c.interest_change_every == 0 {
            let u = users.choose(&mut rng).expect("users").clone();
            let chosen = random_interests(&mut rng);
            set_interests(&u, chosen, &mut subs)?;
            r.interest_changes += 1;
        }
        let si = rng.gen_range(0..users.len());
        let sender = users[si].clone();
        let own_topics: Vec<&String> = subs.iter().filter(|(_, s)| s.contains(&sender)).map(|(t, _)| t).collect();
        let body = format!("message {m} from user {si}");
        if !own_topics.is_empty() && rng.gen_bool(0.5) {
            let topic = own_topics.choose(&mut rng).expect("non-empty").to_string();
            let conv = ConversationRef::topic(&topic);
            let id = p.post_topic(&sender, &topic, &body)?;
            for s in &subs[&topic] {
                if s != &sender {
                    expected_notes.push((s.clone(), conv.to_string(), id));
                }
            }
            accepted.entry(conv).or_default().push((sender, body));
            r.topic_posts += 1;
        } else {
            let mut ri = rng.gen_range(0..users.len() - 1);
            if ri >= si {
                ri += 1;
            }
            let to = users[ri].clone();
            let conv = ConversationRef::direct(&sender, &to);
            let id = p.send_direct(&sender, &to, &body)?;
            expected_notes.push((to, conv.to_string(), id));
            accepted.entry(conv).or_default().push((sender, body));
            r.direct_messages += 1;
        }
        r.messages_sent += 1;
        if !rng.gen_bool(c.delay_rate) {
            deliver_all(p, push, &mut clients, &mut rng, &mut r)?;
        }
    }
    deliver_all(p, push, &mut clients, &mut rng, &mut r)?;

    // Final catch-up, then compare every client with the server.
    for u in &users {
        let client = clients.get_mut(u).expect("client");
        for conv in p.conversations(u)? {
            client_sync(p, u, client, &conv, &mut r)?;
            let server = p.sync(u, &conv, 0)?.messages;
            if client.logs.get(&conv).map_or(&[][..], |l| l.as_slice()) != server.as_slice() {
                r.log_mismatches += 1;
                r.violations.push(format!("client log of {u} differs from the server for {conv}"));
            }
        }
    }

    // Server logs against what the harness saw accepted.
    let salt = &p.config().pseudonym_salt;
    let reader = |conv: &ConversationRef| -> String {
        match conv {
            ConversationRef::Direct { members } => members[0].clone(),
            ConversationRef::Topic { topic } => subs[topic].iter().next().cloned().unwrap_or_default(),
        }
    };
    for (conv, msgs) in &accepted {
        let server = match conv {
            ConversationRef::Topic { topic } if subs[topic].is_empty() => {
                // Nobody can read the topic any more; join it briefly.
                let who = &users[0];
                let before = p.interests(who)?;
                let mut with = before.clone();
                with.push(topic.clone());
                p.set_interests(who, &with)?;
                let log = p.sync(who, conv, 0)?.messages;
                p.set_interests(who, &before)?;
                log
            }
            _ => p.sync(&reader(conv), conv, 0)?.messages,
        };
        let ok = server.len() == msgs.len()
            && server.iter().zip(msgs).enumerate().all(|(i, (m, (author, body)))| {
                let sender_ok = match conv {
                    ConversationRef::Direct { .. } => &m.sender == author,
                    ConversationRef::Topic { topic } => {
                        m.sender == pseudonym(salt, topic, author) && &m.sender != author
                    }
                };
                m.id == i as u64 + 1 && &m.body == body && sender_ok
            });
        if !ok {
            r.violations.push(format!("server log for {conv} differs from the accepted messages"));
        }
    }

    let (mut sent, dropped, duplicated) = {
        let s = push.state.lock();
        let sent: Vec<NoteKey> = s
            .sent
            .iter()
            .map(|n| (n.recipient.clone(), n.conversation.to_string(), n.hint))
            .collect();
        (sent, s.dropped, s.duplicated)
    };
    r.notifications_pushed = sent.len();
    r.notifications_expected = expected_notes.len();
    r.dropped = dropped;
    r.duplicated = duplicated;
    sent.sort();
    expected_notes.sort();
    r.fanout_matches = sent == expected_notes;
    if !r.fanout_matches {
        r.violations.push("notification fan-out differs from the recomputed subscriber sets".into());
    }
    if r.ordering_violations > 0 {
        r.violations.push(format!("{} ordering violations", r.ordering_violations));
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_script_parses() {
        let s = Script::shipped();
        assert_eq!(s.chat, ChatScript::default());
        assert!(Script::parse("seed = 1").is_err());
        let broken = DEFAULT_SCRIPT.replace("feedback = [\"It was nice, thank you\", \"Too long today\", \"I enjoyed it\"]", "feedback = []");
        assert!(Script::parse(&broken).is_err());
    }

    #[test]
    fn short_run_passes() {
        let mut script = Script::shipped();
        script.chat.messages = 60;
        let r = run(
            &PlatformConfig::default(),
            &SimulationOptions {
                days: 3,
                users: 2,
                script,
            },
        )
        .unwrap();
        assert!(r.passed, "{:#?}", r);
        assert_eq!(r.program.health_records, 6);
        assert_eq!(r.chat.messages_sent, 60);
    }
}
