//! Exhaustive exploration of the phase machine over a small input
//! alphabet.
//!
//! Every reachable state is expanded with every symbol. States are
//! memoized on their full content minus the transcript (plus whether a
//! hotline was shown on the path), so the search covers every path while
//! visiting each distinct state once.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::Serialize;

use crate::empathy::EmpathyScores;
use crate::lang::Language;
use crate::nlu::{classify, IntentFrame, Ruleset, Utterance};

use super::engine::health_record;
use super::{recommend_activity, ActivityPreferences, DialogueEngine, Directive, Phase, SessionState, MAX_RETRIES};

/// One input of the alphabet.
#[derive(Debug, Clone)]
pub struct Symbol {
    pub label: String,
    pub text: String,
    pub frame: IntentFrame,
    pub scores: Option<EmpathyScores>,
}

/// Six inputs classified with the shipped rules: yes, no, an invalid
/// number, the continue signal, a normal and a high temperature.
pub fn default_alphabet(lang: Language) -> Vec<Symbol> {
    let ruleset = Ruleset::shipped(lang);
    let texts: [(&str, &str); 6] = match lang {
        Language::En => [
            ("affirm", "yes"),
            ("deny", "no"),
            ("other", "45"),
            ("resume", "continue"),
            ("normal_temperature", "36.5"),
            ("high_temperature", "39"),
        ],
        Language::Zh => [
            ("affirm", "是的"),
            ("deny", "不是"),
            ("other", "四十五"),
            ("resume", "继续"),
            ("normal_temperature", "36.5"),
            ("high_temperature", "三十九"),
        ],
    };
    texts
        .iter()
        .map(|(label, text)| {
            let u = Utterance::new(*text, lang).expect("non-empty");
            Symbol {
                label: label.to_string(),
                text: text.to_string(),
                frame: classify(&u, &ruleset).expect("non-empty"),
                scores: None,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ExploreReport {
    pub states: usize,
    /// Distinct input sequences from a start to End.
    pub paths: u128,
    /// Most user turns on any path to End.
    pub max_turns: usize,
    pub phases_visited: BTreeSet<Phase>,
    pub escalated_endings: usize,
    pub violations: Vec<String>,
}

#[derive(Clone, Copy)]
struct Node {
    depth: usize,
    paths: u128,
}

struct Search<'a> {
    engine: &'a DialogueEngine,
    alphabet: &'a [Symbol],
    memo: HashMap<(String, bool), Node>,
    on_path: HashSet<(String, bool)>,
    report: ExploreReport,
}

fn key(state: &SessionState, saw_hotline: bool) -> (String, bool) {
    let mut s = state.clone();
    s.turn_history.clear();
    (serde_json::to_string(&s).expect("state serializes"), saw_hotline)
}

impl Search<'_> {
    fn violation(&mut self, msg: String) {
        if self.report.violations.len() < 100 {
            self.report.violations.push(msg);
        }
    }

    fn visit(&mut self, state: &SessionState, saw_hotline: bool) -> Node {
        let k = key(state, saw_hotline);
        if let Some(n) = self.memo.get(&k) {
            return *n;
        }
        if !self.on_path.insert(k.clone()) {
            self.violation(format!("cycle through {:?}", state.phase));
            return Node { depth: 0, paths: 0 };
        }
        self.report.phases_visited.insert(state.phase);
        if state.retry_count > MAX_RETRIES {
            self.violation(format!("retry_count {} in {:?}", state.retry_count, state.phase));
        }
        match state.phase {
            Phase::Intro if state.day != 1 => self.violation(format!("Intro on day {}", state.day)),
            Phase::FuturePlans if state.day == 1 => self.violation("FuturePlans on day 1".into()),
            _ => {}
        }

        let node = if state.phase == Phase::End {
            let escalated = health_record(state).map(|r| r.escalated).unwrap_or(false);
            if escalated {
                self.report.escalated_endings += 1;
                if !saw_hotline {
                    self.violation(format!("escalation without hotline: {:?}", state.facts));
                }
            }
            Node { depth: 0, paths: 1 }
        } else {
            let mut best = Node { depth: 0, paths: 0 };
            for sym in self.alphabet {
                let (next, resp) = match self.engine.advance(state, &sym.text, &sym.frame, sym.scores.as_ref()) {
                    Ok(x) => x,
                    Err(e) => {
                        self.violation(format!("{:?} + {}: {e}", state.phase, sym.label));
                        continue;
                    }
                };
                if !state.phase.successors().contains(&next.phase) {
                    self.violation(format!("edge {:?} -> {:?} not in table", state.phase, next.phase));
                }
                if resp.directive != Directive::EndSession && !resp.expects_input() {
                    self.violation(format!("{:?} + {}: `{}` asks nothing", state.phase, sym.label, resp.variant));
                }
                if matches!(resp.directive, Directive::ShowActivity { .. }) && state.phase != Phase::ActivityOffer {
                    self.violation(format!("show_activity from {:?}", state.phase));
                }
                if resp.directive == Directive::EndSession && next.phase != Phase::End {
                    self.violation(format!("end_session directive in {:?}", next.phase));
                }
                let shown = saw_hotline || matches!(resp.directive, Directive::ShowHotline { .. });
                let child = self.visit(&next, shown);
                best.depth = best.depth.max(child.depth + 1);
                best.paths = best.paths.saturating_add(child.paths);
            }
            best
        };
        self.on_path.remove(&k);
        self.memo.insert(k, node);
        node
    }
}

/// Explores from the session start of each `(day, language)`.
pub fn explore(engine: &DialogueEngine, starts: &[(u32, Language)], alphabet: &[Symbol]) -> ExploreReport {
    let mut search = Search {
        engine,
        alphabet,
        memo: HashMap::new(),
        on_path: HashSet::new(),
        report: ExploreReport::default(),
    };
    let prefs = ActivityPreferences::default();
    for (day, lang) in starts {
        match engine.start("explorer", *day, *lang, recommend_activity(&prefs, *day)) {
            Ok((state, resp)) => {
                if !resp.expects_input() {
                    search.violation(format!("opening `{}` asks nothing", resp.variant));
                }
                let n = search.visit(&state, false);
                search.report.max_turns = search.report.max_turns.max(n.depth);
                search.report.paths = search.report.paths.saturating_add(n.paths);
            }
            Err(e) => search.violation(format!("start day {day}: {e}")),
        }
    }
    search.report.states = search.memo.len();
    search.report
}
