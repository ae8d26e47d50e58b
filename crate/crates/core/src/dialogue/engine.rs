use crate::empathy::EmpathyScores;
use crate::lang::Language;
use crate::nlu::{parse_number, IntentFrame};
use crate::screening::{classify_temperature, evaluate_breath, HealthFlag, HealthRecord, TemperatureClass};

use super::activity::ActivityRecommendation;
use super::templates::{Templates, Variant};
use super::{BotResponse, DialogueError, Directive, Facts, Mood, Phase, SessionState, Speaker, Turn};

/// Attempts per step before the session moves on.
pub const MAX_RETRIES: u8 = 3;
pub const DEFAULT_STRESS_THRESHOLD: f64 = 0.5;

/// Empathetic when the turn scored negative or its stress exceeds the
/// threshold; neutral otherwise, including when there are no scores.
pub fn select_variant(scores: Option<&EmpathyScores>, stress_threshold: f64) -> Variant {
    match scores {
        Some(s) if s.sentiment.is_negative() || s.stress.value() > stress_threshold => Variant::Empathetic,
        _ => Variant::Neutral,
    }
}

/// Pure transition function of the daily session.
#[derive(Debug, Clone)]
pub struct DialogueEngine {
    en: Templates,
    zh: Templates,
    pub stress_threshold: f64,
    pub hotline: String,
}

struct Reply {
    key: &'static str,
    directive: Directive,
}

impl Reply {
    fn ask(key: &'static str) -> Self {
        Self {
            key,
            directive: Directive::None,
        }
    }

    fn with(key: &'static str, directive: Directive) -> Self {
        Self { key, directive }
    }
}

impl DialogueEngine {
    pub fn new(en: Templates, zh: Templates, stress_threshold: f64, hotline: impl Into<String>) -> Self {
        Self {
            en,
            zh,
            stress_threshold,
            hotline: hotline.into(),
        }
    }

    pub fn shipped(hotline: impl Into<String>) -> Self {
        Self::new(
            Templates::shipped(Language::En),
            Templates::shipped(Language::Zh),
            DEFAULT_STRESS_THRESHOLD,
            hotline,
        )
    }

    pub fn templates(&self, lang: Language) -> &Templates {
        match lang {
            Language::En => &self.en,
            Language::Zh => &self.zh,
        }
    }

    fn render(&self, state: &SessionState, reply: Reply, variant: Variant, scores: Option<&EmpathyScores>) -> BotResponse {
        let t = self.templates(state.language);
        let kind = t.kind_name(state.recommendation.kind);
        let object = state.facts.gratitude_object.as_deref().unwrap_or("");
        let r = t.render(
            reply.key,
            variant,
            state.day,
            &[("kind", kind), ("hotline", &self.hotline), ("object", object)],
        );
        BotResponse {
            text: r.text,
            directive: reply.directive,
            empathy_echo: scores.cloned(),
            variant: r.id,
        }
    }

    fn say(state: &mut SessionState, resp: &BotResponse) {
        state.turn_history.push(Turn {
            speaker: Speaker::Nora,
            text: resp.text.clone(),
            frame: None,
            scores: None,
        });
    }

    /// Opens the session for `day`: the introduction on day 1, a
    /// plans-after-quarantine question afterwards.
    pub fn start(
        &self,
        user: &str,
        day: u32,
        language: Language,
        recommendation: ActivityRecommendation,
    ) -> Result<(SessionState, BotResponse), DialogueError> {
        if day == 0 {
            return Err(DialogueError::InvalidInput("day must be at least 1".into()));
        }
        let (phase, key) = if day == 1 {
            (Phase::Intro, "intro")
        } else {
            (Phase::FuturePlans, "future_plans")
        };
        let mut state = SessionState {
            user: user.to_string(),
            day,
            language,
            phase,
            retry_count: 0,
            breath_count: None,
            facts: Facts::default(),
            health_flags: Vec::new(),
            hotline_shown: false,
            recommendation,
            turn_history: Vec::new(),
        };
        let resp = self.render(&state, Reply::ask(key), Variant::Neutral, None);
        Self::say(&mut state, &resp);
        Ok((state, resp))
    }

    /// One user turn.
    pub fn advance(
        &self,
        state: &SessionState,
        text: &str,
        frame: &IntentFrame,
        scores: Option<&EmpathyScores>,
    ) -> Result<(SessionState, BotResponse), DialogueError> {
        if state.phase == Phase::End {
            return Err(DialogueError::InvalidState("session has ended".into()));
        }
        let mut s = state.clone();
        s.turn_history.push(Turn {
            speaker: Speaker::User,
            text: text.to_string(),
            frame: Some(frame.clone()),
            scores: scores.cloned(),
        });
        let reply = self.step(&mut s, text, frame, scores);
        let variant = select_variant(scores, self.stress_threshold);
        let resp = self.render(&s, reply, variant, scores);
        if matches!(resp.directive, Directive::ShowHotline { .. }) {
            s.hotline_shown = true;
        }
        Self::say(&mut s, &resp);
        Ok((s, resp))
    }

    fn enter(s: &mut SessionState, phase: Phase) {
        s.phase = phase;
        s.retry_count = 0;
    }

    /// Counts a failed attempt; true once the limit is reached.
    fn exhausted(s: &mut SessionState) -> bool {
        s.retry_count += 1;
        s.retry_count >= MAX_RETRIES
    }

    fn step(&self, s: &mut SessionState, text: &str, frame: &IntentFrame, scores: Option<&EmpathyScores>) -> Reply {
        match s.phase {
            Phase::Intro | Phase::FuturePlans => {
                Self::enter(s, Phase::Mood);
                Reply::ask("ask_mood")
            }
            Phase::Mood => {
                s.facts.mood = if frame.is("mood_positive") {
                    Some(Mood::Positive)
                } else if frame.is("mood_negative") {
                    Some(Mood::Negative)
                } else {
                    scores.map(|sc| if sc.sentiment.is_negative() { Mood::Negative } else { Mood::Positive })
                };
                Self::enter(s, Phase::Temperature);
                Reply::with("ask_temperature", Directive::RequestNumber)
            }
            Phase::Temperature => {
                let reading = parse_number(text, s.language)
                    .filter(|t| matches!(classify_temperature(*t), Ok(c) if c != TemperatureClass::Invalid));
                match reading {
                    Some(t) => {
                        s.facts.temperature = Some(t);
                        Self::enter(s, Phase::Breath);
                        Reply::with("ask_breath_count", Directive::RequestCount)
                    }
                    None if Self::exhausted(s) => {
                        s.facts.temperature = None;
                        s.health_flags.push(HealthFlag::TemperatureUnreadable);
                        Self::enter(s, Phase::Breath);
                        Reply::with("skip_temperature", Directive::RequestCount)
                    }
                    None => Reply::with("reask_temperature", Directive::RequestNumber),
                }
            }
            Phase::Breath => match s.breath_count.take() {
                None if frame.is("deny") => {
                    s.facts.breath = None;
                    s.health_flags.push(HealthFlag::BreathDeclined);
                    self.finish_breath(s)
                }
                None => {
                    s.breath_count = Some(text.to_string());
                    s.retry_count = 0;
                    Reply::ask("ask_breath_short")
                }
                Some(count_text) => {
                    let eval = evaluate_breath(&count_text, s.language, frame);
                    if eval.reask {
                        if !s.health_flags.contains(&HealthFlag::BreathReasked) {
                            s.health_flags.push(HealthFlag::BreathReasked);
                        }
                        if !Self::exhausted(s) {
                            s.breath_count = Some(count_text);
                            return Reply::ask("reask_breath_short");
                        }
                    }
                    s.facts.breath = Some(eval.result);
                    self.finish_breath(s)
                }
            },
            Phase::Gratitude => {
                s.facts.gratitude_object = frame.slots.get("object").cloned();
                Self::enter(s, Phase::ActivityOffer);
                if s.facts.gratitude_object.is_some() {
                    Reply::ask("offer_activity_object")
                } else {
                    Reply::ask("offer_activity")
                }
            }
            Phase::ActivityOffer => {
                if frame.is("affirm") {
                    s.facts.chosen_activity = Some(s.recommendation.kind);
                    Self::enter(s, Phase::ActivityRunning);
                    Reply::with(
                        "start_activity",
                        Directive::ShowActivity {
                            kind: s.recommendation.kind,
                            video: s.recommendation.video.clone(),
                        },
                    )
                } else if frame.is("deny") || Self::exhausted(s) {
                    Self::enter(s, Phase::Feedback);
                    Reply::ask("ask_feedback")
                } else {
                    Reply::ask("reoffer_activity")
                }
            }
            Phase::ActivityRunning => {
                if frame.is("resume") || Self::exhausted(s) {
                    Self::enter(s, Phase::Feedback);
                    Reply::ask("ask_feedback")
                } else {
                    Reply::ask("activity_waiting")
                }
            }
            Phase::Feedback => {
                s.facts.feedback = Some(text.to_string());
                Self::enter(s, Phase::End);
                Reply::with("farewell", Directive::EndSession)
            }
            Phase::End => unreachable!("checked in advance"),
        }
    }

    /// Leaves the breath test, showing the hotline if the day's readings
    /// call for it.
    fn finish_breath(&self, s: &mut SessionState) -> Reply {
        Self::enter(s, Phase::Gratitude);
        if health_record(s).map(|r| r.escalated).unwrap_or(false) {
            Reply::with(
                "escalate",
                Directive::ShowHotline {
                    hotline: self.hotline.clone(),
                },
            )
        } else {
            Reply::ask("ask_gratitude")
        }
    }
}

/// The day's health record as collected so far.
pub(crate) fn health_record(s: &SessionState) -> Result<HealthRecord, DialogueError> {
    Ok(HealthRecord::new(
        s.day,
        s.facts.temperature,
        s.facts.breath,
        s.health_flags.clone(),
    )?)
}
