use std::sync::atomic::{AtomicUsize, Ordering};

use serde_json::Value;

use super::explore::{default_alphabet, explore};
use super::session::*;
use super::*;
use crate::empathy::{
    ClassSet, EmotionDistribution, EmpathyConfig, EmpathyService, SentimentLabel, SentimentScore, StressScore,
};
use crate::nlu::{classify, Ruleset, Utterance};
use crate::screening::history;
use crate::store::{collections, Document, DocumentStore, MemoryStore, Query, StoreResult};

fn engine() -> DialogueEngine {
    DialogueEngine::shipped("hotline 1833")
}

fn scores(label: SentimentLabel, stress: f64) -> EmpathyScores {
    EmpathyScores {
        sentiment: SentimentScore::new(label, 0.9).unwrap(),
        emotion: EmotionDistribution::uniform(ClassSet::default_set()),
        stress: StressScore::new(stress).unwrap(),
    }
}

struct Driver {
    engine: DialogueEngine,
    state: SessionState,
    rules: Ruleset,
    responses: Vec<BotResponse>,
}

impl Driver {
    fn new(day: u32) -> Self {
        let engine = engine();
        let (state, first) = engine
            .start("u1", day, Language::En, recommend_activity(&ActivityPreferences::default(), day))
            .unwrap();
        Self {
            engine,
            state,
            rules: Ruleset::shipped(Language::En),
            responses: vec![first],
        }
    }

    fn say(&mut self, text: &str) -> &BotResponse {
        self.say_scored(text, None)
    }

    fn say_scored(&mut self, text: &str, sc: Option<EmpathyScores>) -> &BotResponse {
        let frame = classify(&Utterance::new(text, Language::En).unwrap(), &self.rules).unwrap();
        let (next, resp) = self.engine.advance(&self.state, text, &frame, sc.as_ref()).unwrap();
        self.state = next;
        self.responses.push(resp);
        self.responses.last().unwrap()
    }
}

#[test]
fn day_one_opens_with_intro_later_days_with_plans() {
    let e = engine();
    let rec = recommend_activity(&ActivityPreferences::default(), 1);
    assert_eq!(e.start("u", 1, Language::En, rec.clone()).unwrap().0.phase, Phase::Intro);
    assert_eq!(e.start("u", 2, Language::En, rec.clone()).unwrap().0.phase, Phase::FuturePlans);
    assert!(e.start("u", 0, Language::En, rec).is_err());
}

#[test]
fn consecutive_openings_differ() {
    let e = engine();
    let rec = recommend_activity(&ActivityPreferences::default(), 1);
    for lang in Language::ALL {
        let open: Vec<String> = (1..=14).map(|d| e.start("u", d, lang, rec.clone()).unwrap().1.text).collect();
        for w in open.windows(2) {
            assert_ne!(w[0], w[1]);
        }
    }
}

#[test]
fn invalid_temperature_is_asked_again() {
    let mut d = Driver::new(2);
    d.say("I'm looking forward to Japan");
    d.say("pretty good");
    assert_eq!(d.state.phase, Phase::Temperature);
    let r = d.say("45 degrees").clone();
    assert_eq!(d.state.phase, Phase::Temperature);
    assert_eq!(r.directive, Directive::RequestNumber);
    assert!(r.variant.starts_with("reask_temperature"));
    d.say("50");
    let r = d.say("no idea").clone();
    assert_eq!(d.state.phase, Phase::Breath);
    assert!(r.variant.starts_with("skip_temperature"));
    assert_eq!(d.state.facts.temperature, None);
    assert!(d.state.health_flags.contains(&crate::screening::HealthFlag::TemperatureUnreadable));
}

#[test]
fn short_of_breath_shows_hotline() {
    let mut d = Driver::new(1);
    d.say("I'm Sam");
    d.say("fine");
    assert_eq!(d.say("36.6").directive, Directive::RequestCount);
    d.say("one two three four five six seven");
    let r = d.say("yes").clone();
    assert_eq!(r.directive, Directive::ShowHotline { hotline: "hotline 1833".into() });
    assert!(r.text.contains("hotline 1833"));
    assert_eq!(d.state.phase, Phase::Gratitude);
    assert_eq!(d.state.facts.breath.unwrap().max_count, 7);
}

#[test]
fn fever_shows_hotline_even_without_shortness() {
    let mut d = Driver::new(3);
    d.say("travel");
    d.say("ok");
    d.say("38.5");
    d.say("1 2 3 4 5 6 7 8 9 10");
    let r = d.say("no").clone();
    assert!(matches!(r.directive, Directive::ShowHotline { .. }));
}

#[test]
fn declined_activity_goes_to_feedback() {
    let mut d = Driver::new(1);
    for t in ["hi", "good", "36.5", "1 2 3", "no"] {
        d.say(t);
    }
    let r = d.say("I am very grateful because of my parents").clone();
    assert!(r.text.contains("parents"), "{}", r.text);
    assert_eq!(d.state.facts.gratitude_object.as_deref(), Some("parents"));
    let r = d.say("no thanks").clone();
    assert_eq!(d.state.phase, Phase::Feedback);
    assert_eq!(r.directive, Directive::None);
    assert_eq!(d.state.facts.chosen_activity, None);
}

#[test]
fn accepted_activity_waits_for_continue() {
    let mut d = Driver::new(1);
    for t in ["hi", "good", "36.5", "1 2 3", "no", "my friends"] {
        d.say(t);
    }
    let r = d.say("yes").clone();
    assert_eq!(
        r.directive,
        Directive::ShowActivity { kind: ActivityKind::Exercise, video: default_video(ActivityKind::Exercise, 1) }
    );
    d.say("hmm");
    assert_eq!(d.state.phase, Phase::ActivityRunning);
    d.say("continue");
    assert_eq!(d.state.phase, Phase::Feedback);
    let r = d.say("it was nice").clone();
    assert_eq!(r.directive, Directive::EndSession);
    assert_eq!(d.state.phase, Phase::End);
    assert!(matches!(
        d.engine.advance(&d.state, "hello", &IntentFrame::fallback(), None),
        Err(DialogueError::InvalidState(_))
    ));
}

#[test]
fn negative_stressed_mood_gets_empathetic_reply() {
    let mut d = Driver::new(2);
    d.say("home");
    let r = d.say_scored("I feel awful", Some(scores(SentimentLabel::Negative, 0.9))).clone();
    assert!(r.variant.starts_with("ask_temperature/empathetic/"), "{}", r.variant);
    assert!(r.empathy_echo.is_some());
}

#[test]
fn variant_selection_table() {
    let buckets = [0.0, 0.25, 0.5, 0.5000001, 0.75, 1.0];
    for label in [SentimentLabel::Positive, SentimentLabel::Negative] {
        for stress in buckets {
            let want = if label == SentimentLabel::Negative || stress > 0.5 {
                Variant::Empathetic
            } else {
                Variant::Neutral
            };
            let sc = scores(label, stress);
            assert_eq!(select_variant(Some(&sc), 0.5), want, "{label:?} {stress}");

            let mut d = Driver::new(2);
            d.say("paris");
            let r = d.say_scored("so so", Some(sc)).clone();
            assert!(r.variant.starts_with(&format!("ask_temperature/{}/", want.as_str())));
        }
    }
    assert_eq!(select_variant(None, 0.5), Variant::Neutral);
}

#[test]
fn zh_session_runs() {
    let e = engine();
    let rules = Ruleset::shipped(Language::Zh);
    let (mut s, _) = e
        .start("u", 1, Language::Zh, recommend_activity(&ActivityPreferences::default(), 1))
        .unwrap();
    for t in ["我叫小明", "还不错", "三十六点五", "一二三四五六七八", "没有", "我很感恩我的家人", "好的", "继续", "很好"] {
        let f = classify(&Utterance::new(t, Language::Zh).unwrap(), &rules).unwrap();
        s = e.advance(&s, t, &f, None).unwrap().0;
    }
    assert_eq!(s.phase, Phase::End);
    assert_eq!(s.facts.temperature, Some(36.5));
    assert_eq!(s.facts.breath.unwrap().max_count, 8);
    assert_eq!(s.facts.chosen_activity, Some(ActivityKind::Exercise));
}

#[test]
fn exhaustive_traversal_terminates_and_covers() {
    let e = engine();
    for lang in Language::ALL {
        let alphabet = default_alphabet(lang);
        let labels: Vec<_> = alphabet.iter().map(|s| s.frame.intent.as_str()).collect();
        assert_eq!(&labels[..4], ["affirm", "deny", "fallback", "resume"], "{lang}");
        let report = explore(&e, &[(1, lang), (2, lang)], &alphabet);
        assert!(report.violations.is_empty(), "{:#?}", report.violations);
        assert!(report.max_turns <= 25, "{}", report.max_turns);
        assert_eq!(report.phases_visited.len(), Phase::ALL.len());
        assert!(report.escalated_endings > 0);
    }
}

#[test]
fn aggregates_are_means_or_absent() {
    let a = scores(SentimentLabel::Positive, 0.2);
    let b = scores(SentimentLabel::Negative, 0.4);
    let (sent, emo, stress) = aggregate(&[&a, &b]).unwrap();
    assert!((stress.unwrap() - 0.3).abs() < 1e-12);
    assert!(sent.unwrap().abs() < 1e-12);
    assert_eq!(emo.unwrap(), EmotionDistribution::uniform(ClassSet::default_set()));
    assert_eq!(aggregate(&[]).unwrap(), (None, None, None));
}

/// Counts writes per collection.
struct Counting {
    inner: MemoryStore,
    health_writes: AtomicUsize,
}

impl DocumentStore for Counting {
    fn put(&self, c: &str, k: &str, b: Value) -> StoreResult<u64> {
        if c == collections::HEALTH {
            self.health_writes.fetch_add(1, Ordering::SeqCst);
        }
        self.inner.put(c, k, b)
    }
    fn get(&self, c: &str, k: &str) -> StoreResult<Option<Document>> {
        self.inner.get(c, k)
    }
    fn query(&self, c: &str, q: &Query) -> StoreResult<Vec<Document>> {
        self.inner.query(c, q)
    }
    fn compare_and_put(&self, c: &str, k: &str, e: u64, b: Value) -> StoreResult<u64> {
        if c == collections::HEALTH {
            self.health_writes.fetch_add(1, Ordering::SeqCst);
        }
        self.inner.compare_and_put(c, k, e, b)
    }
}

#[test]
fn stored_session_end_to_end() {
    let store = Counting { inner: MemoryStore::platform(), health_writes: AtomicUsize::new(0) };
    let e = engine();
    let empathy = EmpathyService::baseline(&EmpathyConfig::default());
    let rules = Ruleset::shipped(Language::En);
    let prefs = ActivityPreferences::default();
    start_session(&store, &e, "u1", 1, Language::En, &prefs, 14).unwrap();
    assert!(matches!(
        start_session(&store, &e, "u1", 1, Language::En, &prefs, 14),
        Err(DialogueError::Conflict(_))
    ));
    assert!(start_session(&store, &e, "u1", 15, Language::En, &prefs, 14).is_err());
    assert_eq!(open_session(&store, "u1").unwrap().unwrap().day, 1);

    let mut state = None;
    for t in ["I'm Ana", "I feel stressed and anxious", "36.7", "one two three", "no", "my family", "no", "good"] {
        let u = Utterance::new(t, Language::En).unwrap();
        let f = classify(&u, &rules).unwrap();
        let sc = empathy.score_turn(&u, None).unwrap();
        let (s, _) = advance_session(&store, &e, "u1", 1, t, &f, Some(&sc)).unwrap();
        if s.phase != Phase::End {
            assert!(matches!(summarize(&s), Err(DialogueError::InvalidState(_))));
        }
        state = Some(s);
    }
    let state = state.unwrap();
    assert_eq!(state.phase, Phase::End);
    assert!(open_session(&store, "u1").unwrap().is_none());
    let summary = close_session(&store, &state, 14).unwrap();
    assert_eq!(summary.user_turns, 8);
    assert!(summary.stress.unwrap() > 0.0);
    assert_eq!(store.health_writes.load(Ordering::SeqCst), 1);
    assert_eq!(history(&store, "u1").unwrap().len(), 1);
    assert_eq!(summaries(&store, "u1").unwrap(), vec![summary]);
    assert!(advance_session(&store, &e, "u1", 1, "hi", &IntentFrame::fallback(), None).is_err());
}

#[test]
fn stale_turn_is_a_conflict() {
    let store = MemoryStore::platform();
    let e = engine();
    let (s0, _) = start_session(&store, &e, "u", 2, Language::En, &ActivityPreferences::default(), 14).unwrap();
    advance_session(&store, &e, "u", 2, "hi", &IntentFrame::fallback(), None).unwrap();
    // A writer still holding the day's first version loses.
    let (s1, _) = e.advance(&s0, "hello", &IntentFrame::fallback(), None).unwrap();
    let err = store
        .compare_and_put(collections::SESSIONS, &session_key("u", 2), 1, serde_json::to_value(&s1).unwrap())
        .map_err(DialogueError::from)
        .unwrap_err();
    assert!(matches!(err, DialogueError::Conflict(_)));
}
