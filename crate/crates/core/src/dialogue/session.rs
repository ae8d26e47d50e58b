//! Sessions and daily summaries in the document store.
//!
//! A session document lives under `<user>/<day>` in the sessions
//! collection. Each turn is written with `compare_and_put` against the
//! version it was read at, so a turn never overwrites a concurrent one.

use serde::{Deserialize, Serialize};

use crate::empathy::EmotionDistribution;
use crate::lang::Language;
use crate::nlu::IntentFrame;
use crate::empathy::EmpathyScores;
use crate::screening::{record_day, HealthRecord};
use crate::store::{collections, DocumentStore, DocumentStoreExt, Order, Query};

use super::engine::health_record;
use super::{
    recommend_activity, ActivityKind, ActivityPreferences, BotResponse, DialogueEngine, DialogueError,
    Mood, Phase, SessionState, Speaker,
};

pub fn session_key(user: &str, day: u32) -> String {
    format!("{user}/{day}")
}

/// Per-day roll-up written when a session ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub user: String,
    pub day: u32,
    pub language: Language,
    pub user_turns: usize,
    /// Mean of the label-signed sentiment confidence.
    pub sentiment: Option<f64>,
    pub emotion: Option<EmotionDistribution>,
    pub stress: Option<f64>,
    pub mood: Option<Mood>,
    pub gratitude_object: Option<String>,
    pub chosen_activity: Option<ActivityKind>,
    pub health: HealthRecord,
}

/// Means over the user turns that carried scores; `None` when none did.
pub fn aggregate(
    scores: &[&EmpathyScores],
) -> Result<(Option<f64>, Option<EmotionDistribution>, Option<f64>), DialogueError> {
    if scores.is_empty() {
        return Ok((None, None, None));
    }
    let n = scores.len() as f64;
    let sentiment = scores.iter().map(|s| s.sentiment.signed()).sum::<f64>() / n;
    let stress = scores.iter().map(|s| s.stress.value()).sum::<f64>() / n;
    let class_set = scores[0].emotion.class_set().clone();
    let mut sums = vec![0.0; class_set.len()];
    for s in scores {
        if s.emotion.class_set() != &class_set {
            return Err(DialogueError::InvalidInput("turns were scored over different emotion classes".into()));
        }
        for (acc, v) in sums.iter_mut().zip(s.emotion.scores()) {
            *acc += v;
        }
    }
    let emotion = EmotionDistribution::from_weights(class_set, &sums)
        .map_err(|e| DialogueError::InvalidInput(e.to_string()))?;
    Ok((Some(sentiment), Some(emotion), Some(stress)))
}

/// Summary of an ended session.
pub fn summarize(state: &SessionState) -> Result<SessionSummary, DialogueError> {
    if state.phase != Phase::End {
        return Err(DialogueError::InvalidState(format!("session is still in {:?}", state.phase)));
    }
    let user_turns: Vec<_> = state.turn_history.iter().filter(|t| t.speaker == Speaker::User).collect();
    let scored: Vec<&EmpathyScores> = user_turns.iter().filter_map(|t| t.scores.as_ref()).collect();
    let (sentiment, emotion, stress) = aggregate(&scored)?;
    Ok(SessionSummary {
        user: state.user.clone(),
        day: state.day,
        language: state.language,
        user_turns: user_turns.len(),
        sentiment,
        emotion,
        stress,
        mood: state.facts.mood,
        gratitude_object: state.facts.gratitude_object.clone(),
        chosen_activity: state.facts.chosen_activity,
        health: health_record(state)?,
    })
}

/// Starts the session for `(user, day)`. Fails with a conflict if one
/// already exists for that day, open or ended.
pub fn start_session<S: DocumentStore + ?Sized>(
    store: &S,
    engine: &DialogueEngine,
    user: &str,
    day: u32,
    language: Language,
    prefs: &ActivityPreferences,
    program_days: u32,
) -> Result<(SessionState, BotResponse), DialogueError> {
    if day == 0 || day > program_days {
        return Err(DialogueError::InvalidInput(format!(
            "day {day} is outside the {program_days}-day program"
        )));
    }
    let (state, resp) = engine.start(user, day, language, recommend_activity(prefs, day))?;
    let body = serde_json::to_value(&state).map_err(|e| DialogueError::InvalidInput(e.to_string()))?;
    store
        .compare_and_put(collections::SESSIONS, &session_key(user, day), 0, body)
        .map_err(|e| match DialogueError::from(e) {
            DialogueError::Conflict(_) => {
                DialogueError::Conflict(format!("a session for day {day} already exists"))
            }
            other => other,
        })?;
    Ok((state, resp))
}

pub fn load_session<S: DocumentStore + ?Sized>(
    store: &S,
    user: &str,
    day: u32,
) -> Result<Option<(SessionState, u64)>, DialogueError> {
    Ok(store.get_as(collections::SESSIONS, &session_key(user, day))?)
}

/// The user's sessions, by day.
pub fn sessions<S: DocumentStore + ?Sized>(store: &S, user: &str) -> Result<Vec<SessionState>, DialogueError> {
    let q = Query::new().eq("user", user).order_by("day", Order::Asc);
    Ok(store.query_as(collections::SESSIONS, &q)?)
}

/// The latest session that has not ended.
pub fn open_session<S: DocumentStore + ?Sized>(store: &S, user: &str) -> Result<Option<SessionState>, DialogueError> {
    Ok(sessions(store, user)?.into_iter().rev().find(|s| s.phase != Phase::End))
}

/// Applies one turn and persists the new state.
pub fn advance_session<S: DocumentStore + ?Sized>(
    store: &S,
    engine: &DialogueEngine,
    user: &str,
    day: u32,
    text: &str,
    frame: &IntentFrame,
    scores: Option<&EmpathyScores>,
) -> Result<(SessionState, BotResponse), DialogueError> {
    let (state, version) = load_session(store, user, day)?
        .ok_or_else(|| DialogueError::NotFound(format!("no session for day {day}")))?;
    let (next, resp) = engine.advance(&state, text, frame, scores)?;
    let body = serde_json::to_value(&next).map_err(|e| DialogueError::InvalidInput(e.to_string()))?;
    store.compare_and_put(collections::SESSIONS, &session_key(user, day), version, body)?;
    Ok((next, resp))
}

/// Writes the day's health record and summary for an ended session.
pub fn close_session<S: DocumentStore + ?Sized>(
    store: &S,
    state: &SessionState,
    program_days: u32,
) -> Result<SessionSummary, DialogueError> {
    let summary = summarize(state)?;
    record_day(store, &state.user, summary.health.clone(), program_days)?;
    store.put_as(collections::SUMMARIES, &session_key(&state.user, state.day), &summary)?;
    Ok(summary)
}

pub fn summaries<S: DocumentStore + ?Sized>(store: &S, user: &str) -> Result<Vec<SessionSummary>, DialogueError> {
    let q = Query::new().eq("user", user).order_by("day", Order::Asc);
    Ok(store.query_as(collections::SUMMARIES, &q)?)
}
