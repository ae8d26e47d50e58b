use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::EmpathyError;

/// Tolerance on the total mass of an emotion distribution.
pub const DISTRIBUTION_TOLERANCE: f64 = 1e-9;
/// Tolerance on the sum of the fusion weights.
pub const WEIGHT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentimentLabel {
    Positive,
    Negative,
}

/// Binary sentiment; `confidence` is the winning side's mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSentiment")]
pub struct SentimentScore {
    pub label: SentimentLabel,
    pub confidence: f64,
}

#[derive(Deserialize)]
struct RawSentiment {
    label: SentimentLabel,
    confidence: f64,
}

impl TryFrom<RawSentiment> for SentimentScore {
    type Error = EmpathyError;

    fn try_from(r: RawSentiment) -> Result<Self, Self::Error> {
        SentimentScore::new(r.label, r.confidence)
    }
}

impl SentimentScore {
    pub fn new(label: SentimentLabel, confidence: f64) -> Result<Self, EmpathyError> {
        if !(0.5..=1.0).contains(&confidence) {
            return Err(EmpathyError::OutOfRange(format!(
                "sentiment confidence {confidence} outside [0.5, 1]"
            )));
        }
        Ok(Self { label, confidence })
    }

    /// Confidence signed by label: positive in (0.5, 1], negative in [-1, -0.5].
    pub fn signed(&self) -> f64 {
        match self.label {
            SentimentLabel::Positive => self.confidence,
            SentimentLabel::Negative => -self.confidence,
        }
    }

    pub fn is_negative(&self) -> bool {
        self.label == SentimentLabel::Negative
    }
}

/// Stress on a 0–1 scale.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct StressScore(f64);

impl StressScore {
    pub const ZERO: StressScore = StressScore(0.0);

    pub fn new(value: f64) -> Result<Self, EmpathyError> {
        if !(0.0..=1.0).contains(&value) {
            return Err(EmpathyError::OutOfRange(format!("stress {value} outside [0, 1]")));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for StressScore {
    type Error = EmpathyError;

    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<StressScore> for f64 {
    fn from(s: StressScore) -> f64 {
        s.0
    }
}

/// Ordered, duplicate-free, non-empty list of emotion classes.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ClassSet(Arc<[String]>);

impl ClassSet {
    pub fn new<I, S>(classes: I) -> Result<Self, EmpathyError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let classes: Vec<String> = classes.into_iter().map(Into::into).collect();
        if classes.is_empty() {
            return Err(EmpathyError::InvalidInput("class set is empty".into()));
        }
        for (i, c) in classes.iter().enumerate() {
            if c.trim().is_empty() {
                return Err(EmpathyError::InvalidInput("blank emotion class".into()));
            }
            if classes[..i].contains(c) {
                return Err(EmpathyError::InvalidInput(format!("duplicate emotion class `{c}`")));
            }
        }
        Ok(Self(classes.into()))
    }

    /// happy, sad, angry, neutral
    pub fn default_set() -> Self {
        Self::new(["happy", "sad", "angry", "neutral"]).expect("static classes")
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index_of(&self, class: &str) -> Option<usize> {
        self.0.iter().position(|c| c == class)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn as_slice(&self) -> &[String] {
        &self.0
    }
}

impl Default for ClassSet {
    fn default() -> Self {
        Self::default_set()
    }
}

impl fmt::Debug for ClassSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl Serialize for ClassSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ClassSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        ClassSet::new(v).map_err(serde::de::Error::custom)
    }
}

/// Probability distribution over a [`ClassSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct EmotionDistribution {
    class_set: ClassSet,
    scores: Vec<f64>,
}

impl EmotionDistribution {
    pub fn new(class_set: ClassSet, scores: Vec<f64>) -> Result<Self, EmpathyError> {
        if scores.len() != class_set.len() {
            return Err(EmpathyError::InvalidInput(format!(
                "{} scores for {} classes",
                scores.len(),
                class_set.len()
            )));
        }
        if let Some(bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(EmpathyError::OutOfRange(format!("emotion score {bad} outside [0, 1]")));
        }
        let total: f64 = scores.iter().sum();
        if (total - 1.0).abs() > DISTRIBUTION_TOLERANCE {
            return Err(EmpathyError::OutOfRange(format!("emotion scores sum to {total}")));
        }
        Ok(Self { class_set, scores })
    }

    pub fn uniform(class_set: ClassSet) -> Self {
        let n = class_set.len();
        Self {
            scores: vec![1.0 / n as f64; n],
            class_set,
        }
    }

    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(class_set: ClassSet, weights: &[f64]) -> Result<Self, EmpathyError> {
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || total <= 0.0 || !total.is_finite() {
            return Err(EmpathyError::InvalidInput("weights must be finite, non-negative and not all zero".into()));
        }
        let scores = weights.iter().map(|w| (w / total).clamp(0.0, 1.0)).collect();
        Self::new(class_set, scores)
    }

    pub fn class_set(&self) -> &ClassSet {
        &self.class_set
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn get(&self, class: &str) -> Option<f64> {
        self.class_set.index_of(class).map(|i| self.scores[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.class_set.iter().zip(self.scores.iter().copied())
    }

    /// Most likely class; ties go to the class listed first.
    pub fn argmax(&self) -> &str {
        let mut best = 0;
        for (i, s) in self.scores.iter().enumerate() {
            if *s > self.scores[best] {
                best = i;
            }
        }
        &self.class_set.as_slice()[best]
    }

    pub fn total(&self) -> f64 {
        self.scores.iter().sum()
    }
}

#[derive(Serialize, Deserialize)]
struct WireDistribution {
    class_set: ClassSet,
    scores: ordered::OrderedScores,
}

/// Scores keyed by class, serialized in class-set order.
mod ordered {
    use serde::de::{MapAccess, Visitor};
    use serde::ser::SerializeMap;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub struct OrderedScores(pub Vec<(String, f64)>);

    impl Serialize for OrderedScores {
        fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            let mut m = s.serialize_map(Some(self.0.len()))?;
            for (k, v) in &self.0 {
                m.serialize_entry(k, v)?;
            }
            m.end()
        }
    }

    impl<'de> Deserialize<'de> for OrderedScores {
        fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
            struct V;
            impl<'de> Visitor<'de> for V {
                type Value = OrderedScores;
                fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                    f.write_str("a map of class to score")
                }
                fn visit_map<A: MapAccess<'de>>(self, mut a: A) -> Result<Self::Value, A::Error> {
                    let mut out = Vec::new();
                    while let Some((k, v)) = a.next_entry::<String, f64>()? {
                        out.push((k, v));
                    }
                    Ok(OrderedScores(out))
                }
            }
            d.deserialize_map(V)
        }
    }
}

impl Serialize for EmotionDistribution {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        WireDistribution {
            class_set: self.class_set.clone(),
            scores: ordered::OrderedScores(
                self.iter().map(|(c, v)| (c.to_string(), v)).collect(),
            ),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for EmotionDistribution {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = WireDistribution::deserialize(d)?;
        if w.scores.0.len() != w.class_set.len() {
            return Err(serde::de::Error::custom("score keys must equal the class set"));
        }
        let mut scores = vec![f64::NAN; w.class_set.len()];
        for (k, v) in w.scores.0 {
            let i = w
                .class_set
                .index_of(&k)
                .ok_or_else(|| serde::de::Error::custom(format!("score for unknown class `{k}`")))?;
            scores[i] = v;
        }
        EmotionDistribution::new(w.class_set, scores).map_err(serde::de::Error::custom)
    }
}

/// Convex weights for late fusion of text and audio emotion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights")]
pub struct FusionWeights {
    pub text: f64,
    pub audio: f64,
}

#[derive(Deserialize)]
struct RawWeights {
    text: f64,
    audio: f64,
}

impl TryFrom<RawWeights> for FusionWeights {
    type Error = EmpathyError;

    fn try_from(r: RawWeights) -> Result<Self, Self::Error> {
        FusionWeights::new(r.text, r.audio)
    }
}

impl FusionWeights {
    pub const TEXT_ONLY: FusionWeights = FusionWeights { text: 1.0, audio: 0.0 };

    pub fn new(text: f64, audio: f64) -> Result<Self, EmpathyError> {
        if !(text >= 0.0 && audio >= 0.0) || (text + audio - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(EmpathyError::InvalidInput(format!(
                "fusion weights ({text}, {audio}) must be non-negative and sum to 1"
            )));
        }
        Ok(Self { text, audio })
    }

    pub fn swapped(self) -> Self {
        Self {
            text: self.audio,
            audio: self.text,
        }
    }
}

impl Default for FusionWeights {
    fn default() -> Self {
        Self { text: 0.5, audio: 0.5 }
    }
}

/// Number of summary statistics in [`AudioFeatures::stats`].
pub const AUDIO_STATS: usize = 6;

/// Utterance-level acoustic summary used in place of raw audio.
///
/// `stats` holds, in order: mean frame energy, energy standard deviation,
/// peak energy (all RMS on a 0–1 scale), mean pitch (Hz), pitch standard
/// deviation (Hz), and speaking rate (syllables per second).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AudioFeatures {
    pub stats: [f64; AUDIO_STATS],
    pub duration_secs: f64,
}

impl AudioFeatures {
    pub const ENERGY_MEAN: usize = 0;
    pub const ENERGY_STD: usize = 1;
    pub const ENERGY_MAX: usize = 2;
    pub const PITCH_MEAN: usize = 3;
    pub const PITCH_STD: usize = 4;
    pub const SPEECH_RATE: usize = 5;

    pub fn validate(&self) -> Result<(), EmpathyError> {
        if self.stats.iter().any(|v| !v.is_finite()) || !self.duration_secs.is_finite() {
            return Err(EmpathyError::InvalidInput("audio features must be finite".into()));
        }
        if self.duration_secs <= 0.0 {
            return Err(EmpathyError::InvalidInput("audio duration must be positive".into()));
        }
        Ok(())
    }

    pub fn energy(&self) -> [f64; 3] {
        [
            self.stats[Self::ENERGY_MEAN],
            self.stats[Self::ENERGY_STD],
            self.stats[Self::ENERGY_MAX],
        ]
    }
}

/// The three affect scores of one user turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpathyScores {
    pub sentiment: SentimentScore,
    pub emotion: EmotionDistribution,
    pub stress: StressScore,
}
