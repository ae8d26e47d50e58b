//! The daily session: an agent-initiative phase machine.
//!
//! Day 1 opens with an introduction, later days with a question about
//! plans after quarantine. Both continue with the daily flow: mood,
//! temperature, the single-breath counting test, gratitude, an activity
//! offer and a feedback question. Each reply is rendered from a template
//! whose variant (neutral or empathetic) depends on the affect scores of
//! the user's turn.
//!
//! [`DialogueEngine`] is pure; [`session`] adds persistence.

mod activity;
mod engine;
pub mod explore;
pub mod session;
mod templates;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use activity::{
    default_video, recommend_activity, ActivityChoice, ActivityKind, ActivityPreferences,
    ActivityRecommendation,
};
pub use engine::{select_variant, DialogueEngine, DEFAULT_STRESS_THRESHOLD, MAX_RETRIES};
pub use templates::{Rendered, Templates, Variant, EN_TEMPLATES, KEYS, PLACEHOLDERS, ZH_TEMPLATES};

use crate::empathy::EmpathyScores;
use crate::error::ErrorKind;
use crate::lang::Language;
use crate::nlu::IntentFrame;
use crate::screening::{BreathTestResult, HealthFlag, ScreeningError};
use crate::store::StoreError;

#[derive(Debug, Error)]
pub enum DialogueError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("session not found: {0}")]
    NotFound(String),
    #[error("template: {0}")]
    Template(String),
    #[error(transparent)]
    Screening(#[from] ScreeningError),
    #[error(transparent)]
    Store(StoreError),
}

impl From<StoreError> for DialogueError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Conflict { collection, key, .. } => {
                DialogueError::Conflict(format!("{collection}/{key} was modified concurrently"))
            }
            other => DialogueError::Store(other),
        }
    }
}

impl DialogueError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            DialogueError::InvalidInput(_) | DialogueError::Template(_) => ErrorKind::InvalidInput,
            DialogueError::InvalidState(_) => ErrorKind::InvalidState,
            DialogueError::Conflict(_) => ErrorKind::Conflict,
            DialogueError::NotFound(_) => ErrorKind::NotFound,
            DialogueError::Screening(e) => e.kind(),
            DialogueError::Store(e) => e.kind(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Intro,
    FuturePlans,
    Mood,
    Temperature,
    Breath,
    Gratitude,
    ActivityOffer,
    ActivityRunning,
    Feedback,
    End,
}

impl Phase {
    pub const ALL: [Phase; 10] = [
        Phase::Intro,
        Phase::FuturePlans,
        Phase::Mood,
        Phase::Temperature,
        Phase::Breath,
        Phase::Gratitude,
        Phase::ActivityOffer,
        Phase::ActivityRunning,
        Phase::Feedback,
        Phase::End,
    ];

    /// Phases reachable in one turn.
    pub fn successors(self) -> &'static [Phase] {
        use Phase::*;
        match self {
            Intro | FuturePlans => &[Mood],
            Mood => &[Temperature],
            Temperature => &[Temperature, Breath],
            Breath => &[Breath, Gratitude],
            Gratitude => &[ActivityOffer],
            ActivityOffer => &[ActivityOffer, ActivityRunning, Feedback],
            ActivityRunning => &[ActivityRunning, Feedback],
            Feedback => &[End],
            End => &[],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    Nora,
    User,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
    #[serde(default)]
    pub frame: Option<IntentFrame>,
    #[serde(default)]
    pub scores: Option<EmpathyScores>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mood {
    Positive,
    Negative,
}

/// What the session has learned; each field is written by one phase.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Facts {
    pub mood: Option<Mood>,
    pub temperature: Option<f64>,
    pub breath: Option<BreathTestResult>,
    pub gratitude_object: Option<String>,
    pub chosen_activity: Option<ActivityKind>,
    pub feedback: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub user: String,
    pub day: u32,
    pub language: Language,
    pub phase: Phase,
    /// Failed attempts in the current phase step.
    pub retry_count: u8,
    /// Counting answer waiting for the out-of-breath question.
    #[serde(default)]
    pub breath_count: Option<String>,
    pub facts: Facts,
    #[serde(default)]
    pub health_flags: Vec<HealthFlag>,
    pub hotline_shown: bool,
    pub recommendation: ActivityRecommendation,
    pub turn_history: Vec<Turn>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Directive {
    None,
    ShowActivity { kind: ActivityKind, video: String },
    ShowHotline { hotline: String },
    EndSession,
    RequestNumber,
    RequestCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BotResponse {
    pub text: String,
    pub directive: Directive,
    pub empathy_echo: Option<EmpathyScores>,
    /// Template the text came from, `<key>/<variant>/<index>`.
    pub variant: String,
}

impl BotResponse {
    /// Asks something or tells the user to act.
    pub fn expects_input(&self) -> bool {
        self.directive != Directive::None || self.text.contains('?') || self.text.contains('？')
    }
}

#[cfg(test)]
mod tests;
