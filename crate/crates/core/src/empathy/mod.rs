//! Affect scoring: binary sentiment, emotion (text and audio, late-fused)
//! and stress.
//!
//! Each score comes from a pluggable scorer trait. The shipped
//! implementations are deterministic baselines: lexicon counting for text
//! ([`LexiconScorer`]) and a prosody heuristic for audio features
//! ([`ProsodyScorer`]). [`EmpathyService`] bundles one scorer of each kind
//! with the fusion weights.

mod audio;
pub mod conformance;
mod lexicon;
mod types;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use audio::ProsodyScorer;
pub use lexicon::{LanguageLexicons, Lexicon, LexiconScorer, Segment, NEGATIVE, POSITIVE, STRESS};
pub use types::{
    AudioFeatures, ClassSet, EmotionDistribution, EmpathyScores, FusionWeights, SentimentLabel,
    SentimentScore, StressScore, AUDIO_STATS, DISTRIBUTION_TOLERANCE, WEIGHT_TOLERANCE,
};

use crate::error::ErrorKind;
use crate::lang::Language;
use crate::nlu::Utterance;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmpathyError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("score out of range: {0}")]
    OutOfRange(String),
    #[error("distributions have different class sets: {left:?} vs {right:?}")]
    IncompatibleDistributions { left: Vec<String>, right: Vec<String> },
    #[error("lexicon line {line}: {reason}")]
    Lexicon { line: usize, reason: String },
}

impl EmpathyError {
    pub fn kind(&self) -> ErrorKind {
        ErrorKind::InvalidInput
    }
}

pub trait SentimentScorer: Send + Sync {
    /// Fails on empty text.
    fn score_sentiment(&self, text: &str, lang: Language) -> Result<SentimentScore, EmpathyError>;
}

pub trait TextEmotionScorer: Send + Sync {
    fn class_set(&self) -> &ClassSet;
    fn score_emotion_text(&self, text: &str, lang: Language) -> Result<EmotionDistribution, EmpathyError>;
}

pub trait AudioEmotionScorer: Send + Sync {
    fn class_set(&self) -> &ClassSet;
    fn score_emotion_audio(&self, features: &AudioFeatures) -> Result<EmotionDistribution, EmpathyError>;
}

pub trait StressScorer: Send + Sync {
    /// Never fails; empty text scores 0.
    fn score_stress(&self, text: &str, lang: Language) -> StressScore;
}

/// Weighted average of two distributions over the same classes:
/// `out[c] = w.text * text[c] + w.audio * audio[c]`.
pub fn fuse_emotions(
    text: &EmotionDistribution,
    audio: &EmotionDistribution,
    w: FusionWeights,
) -> Result<EmotionDistribution, EmpathyError> {
    if text.class_set() != audio.class_set() {
        return Err(EmpathyError::IncompatibleDistributions {
            left: text.class_set().as_slice().to_vec(),
            right: audio.class_set().as_slice().to_vec(),
        });
    }
    let scores = text
        .scores()
        .iter()
        .zip(audio.scores())
        .map(|(t, a)| (w.text * t + w.audio * a).clamp(0.0, 1.0))
        .collect();
    EmotionDistribution::new(text.class_set().clone(), scores)
}

/// Settings for [`EmpathyService`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpathyConfig {
    #[serde(default)]
    pub class_set: ClassSet,
    #[serde(default)]
    pub fusion: FusionWeights,
}

impl Default for EmpathyConfig {
    fn default() -> Self {
        Self {
            class_set: ClassSet::default_set(),
            fusion: FusionWeights::default(),
        }
    }
}

/// One scorer of each kind plus the fusion weights.
#[derive(Clone)]
pub struct EmpathyService {
    pub sentiment: Arc<dyn SentimentScorer>,
    pub text_emotion: Arc<dyn TextEmotionScorer>,
    pub audio_emotion: Arc<dyn AudioEmotionScorer>,
    pub stress: Arc<dyn StressScorer>,
    pub fusion: FusionWeights,
}

impl std::fmt::Debug for EmpathyService {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EmpathyService")
            .field("class_set", self.text_emotion.class_set())
            .field("fusion", &self.fusion)
            .finish_non_exhaustive()
    }
}

impl EmpathyService {
    /// Lexicon and prosody baselines with the shipped lexicons.
    pub fn baseline(config: &EmpathyConfig) -> Self {
        let lex = Arc::new(LexiconScorer::shipped(config.class_set.clone()));
        Self::with_lexicons(lex, config)
    }

    pub fn with_lexicons(lex: Arc<LexiconScorer>, config: &EmpathyConfig) -> Self {
        Self {
            sentiment: lex.clone(),
            text_emotion: lex.clone(),
            audio_emotion: Arc::new(ProsodyScorer::new(config.class_set.clone())),
            stress: lex,
            fusion: config.fusion,
        }
    }

    pub fn score_sentiment(&self, text: &str, lang: Language) -> Result<SentimentScore, EmpathyError> {
        self.sentiment.score_sentiment(text, lang)
    }

    pub fn score_stress(&self, text: &str, lang: Language) -> StressScore {
        self.stress.score_stress(text, lang)
    }

    /// Scores a user turn. Without audio the text distribution is used
    /// as-is (weights (1, 0)).
    pub fn score_turn(
        &self,
        utterance: &Utterance,
        audio: Option<&AudioFeatures>,
    ) -> Result<EmpathyScores, EmpathyError> {
        let lang = utterance.language;
        let sentiment = self.sentiment.score_sentiment(&utterance.text, lang)?;
        let text_emotion = self.text_emotion.score_emotion_text(&utterance.text, lang)?;
        let emotion = match audio {
            Some(f) => {
                let audio_emotion = self.audio_emotion.score_emotion_audio(f)?;
                fuse_emotions(&text_emotion, &audio_emotion, self.fusion)?
            }
            None => fuse_emotions(&text_emotion, &text_emotion, FusionWeights::TEXT_ONLY)?,
        };
        let stress = self.stress.score_stress(&utterance.text, lang);
        Ok(EmpathyScores {
            sentiment,
            emotion,
            stress,
        })
    }
}
