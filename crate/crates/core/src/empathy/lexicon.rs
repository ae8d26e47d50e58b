//! `token<TAB>class` lexicons and the counting baselines built on them.

use std::collections::HashMap;

use crate::lang::Language;
use crate::text::tokenize;

use super::types::{
    ClassSet, EmotionDistribution, SentimentLabel, SentimentScore, StressScore,
};
use super::{EmpathyError, SentimentScorer, StressScorer, TextEmotionScorer};

pub const POSITIVE: &str = "positive";
pub const NEGATIVE: &str = "negative";
pub const STRESS: &str = "stress";

/// Token → class table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    entries: HashMap<String, String>,
    /// Longest entry in tokens, bounds Mandarin segmentation.
    max_len: usize,
}

/// One unit of segmented text and its lexicon class, if any.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment<'a> {
    pub text: String,
    pub class: Option<&'a str>,
}

impl Lexicon {
    /// Parses `token<TAB>class` lines. Blank lines and `#` comments are
    /// skipped; tokens are lowercased.
    pub fn parse(doc: &str) -> Result<Self, EmpathyError> {
        let mut entries = HashMap::new();
        for (i, raw) in doc.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (token, class) = line.split_once('\t').ok_or_else(|| EmpathyError::Lexicon {
                line: i + 1,
                reason: "expected token<TAB>class".into(),
            })?;
            let (token, class) = (token.trim().to_lowercase(), class.trim());
            if token.is_empty() || class.is_empty() || class.contains('\t') {
                return Err(EmpathyError::Lexicon {
                    line: i + 1,
                    reason: "empty token or class".into(),
                });
            }
            if let Some(prev) = entries.get(&token) {
                if prev != class {
                    return Err(EmpathyError::Lexicon {
                        line: i + 1,
                        reason: format!("`{token}` already has class `{prev}`"),
                    });
                }
            }
            entries.insert(token, class.to_string());
        }
        let max_len = entries
            .keys()
            .map(|k| k.chars().count())
            .max()
            .unwrap_or(0);
        Ok(Self { entries, max_len })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn class_of(&self, token: &str) -> Option<&str> {
        self.entries.get(token).map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Splits text into scoring units.
    ///
    /// English: one unit per token. Mandarin: greedy longest match of
    /// lexicon entries over the character stream; characters not covered
    /// by an entry are units of their own.
    pub fn segment(&self, text: &str, lang: Language) -> Vec<Segment<'_>> {
        let tokens = tokenize(text, lang);
        match lang {
            Language::En => tokens
                .into_iter()
                .map(|t| {
                    let class = self.class_of(&t.text);
                    Segment { text: t.text, class }
                })
                .collect(),
            Language::Zh => {
                let mut out = Vec::with_capacity(tokens.len());
                let mut i = 0;
                while i < tokens.len() {
                    let mut matched = None;
                    // Entries may span adjacent tokens only when contiguous in the source.
                    let mut joined = String::new();
                    let mut candidates = Vec::new();
                    for j in i..tokens.len() {
                        if j > i && tokens[j].start != tokens[j - 1].end {
                            break;
                        }
                        joined.push_str(&tokens[j].text);
                        if joined.chars().count() > self.max_len.max(1) {
                            break;
                        }
                        candidates.push((j + 1, joined.clone()));
                    }
                    for (end, cand) in candidates.into_iter().rev() {
                        if let Some(class) = self.class_of(&cand) {
                            matched = Some((end, cand, class));
                            break;
                        }
                    }
                    match matched {
                        Some((end, text, class)) => {
                            out.push(Segment {
                                text,
                                class: Some(class),
                            });
                            i = end;
                        }
                        None => {
                            out.push(Segment {
                                text: tokens[i].text.clone(),
                                class: None,
                            });
                            i += 1;
                        }
                    }
                }
                out
            }
        }
    }
}

/// Sentiment, emotion and stress lexicons for one language.
#[derive(Debug, Clone, Default)]
pub struct LanguageLexicons {
    pub sentiment: Lexicon,
    pub emotion: Lexicon,
    pub stress: Lexicon,
}

impl LanguageLexicons {
    pub fn parse(sentiment: &str, emotion: &str, stress: &str) -> Result<Self, EmpathyError> {
        Ok(Self {
            sentiment: Lexicon::parse(sentiment)?,
            emotion: Lexicon::parse(emotion)?,
            stress: Lexicon::parse(stress)?,
        })
    }

    pub fn shipped(lang: Language) -> Self {
        let (s, e, t) = match lang {
            Language::En => (
                include_str!("../../lexicons/sentiment.en"),
                include_str!("../../lexicons/emotion.en"),
                include_str!("../../lexicons/stress.en"),
            ),
            Language::Zh => (
                include_str!("../../lexicons/sentiment.zh"),
                include_str!("../../lexicons/emotion.zh"),
                include_str!("../../lexicons/stress.zh"),
            ),
        };
        Self::parse(s, e, t).expect("shipped lexicons are valid")
    }
}

/// Counting baselines for sentiment, text emotion and stress.
#[derive(Debug, Clone)]
pub struct LexiconScorer {
    en: LanguageLexicons,
    zh: LanguageLexicons,
    class_set: ClassSet,
}

impl LexiconScorer {
    pub fn new(en: LanguageLexicons, zh: LanguageLexicons, class_set: ClassSet) -> Self {
        Self { en, zh, class_set }
    }

    pub fn shipped(class_set: ClassSet) -> Self {
        Self::new(
            LanguageLexicons::shipped(Language::En),
            LanguageLexicons::shipped(Language::Zh),
            class_set,
        )
    }

    pub fn lexicons(&self, lang: Language) -> &LanguageLexicons {
        match lang {
            Language::En => &self.en,
            Language::Zh => &self.zh,
        }
    }
}

impl SentimentScorer for LexiconScorer {
    /// Positive iff positive hits ≥ negative hits; confidence is the
    /// winning share of hits, 0.5 without any.
    fn score_sentiment(&self, text: &str, lang: Language) -> Result<SentimentScore, EmpathyError> {
        if text.trim().is_empty() {
            return Err(EmpathyError::InvalidInput("text is empty".into()));
        }
        let (mut pos, mut neg) = (0u32, 0u32);
        for seg in self.lexicons(lang).sentiment.segment(text, lang) {
            match seg.class {
                Some(POSITIVE) => pos += 1,
                Some(NEGATIVE) => neg += 1,
                _ => {}
            }
        }
        let label = if pos >= neg {
            SentimentLabel::Positive
        } else {
            SentimentLabel::Negative
        };
        let confidence = if pos + neg == 0 {
            0.5
        } else {
            pos.max(neg) as f64 / (pos + neg) as f64
        };
        SentimentScore::new(label, confidence)
    }
}

impl TextEmotionScorer for LexiconScorer {
    fn class_set(&self) -> &ClassSet {
        &self.class_set
    }

    /// Add-one smoothed keyword counts over the class set; uniform when
    /// no keyword is present.
    fn score_emotion_text(&self, text: &str, lang: Language) -> Result<EmotionDistribution, EmpathyError> {
        let mut counts = vec![0.0f64; self.class_set.len()];
        for seg in self.lexicons(lang).emotion.segment(text, lang) {
            if let Some(i) = seg.class.and_then(|c| self.class_set.index_of(c)) {
                counts[i] += 1.0;
            }
        }
        let smoothed: Vec<f64> = counts.iter().map(|c| c + 1.0).collect();
        EmotionDistribution::from_weights(self.class_set.clone(), &smoothed)
    }
}

impl StressScorer for LexiconScorer {
    /// Share of units that are stress keywords.
    fn score_stress(&self, text: &str, lang: Language) -> StressScore {
        let segs = self.lexicons(lang).stress.segment(text, lang);
        if segs.is_empty() {
            return StressScore::ZERO;
        }
        let hits = segs.iter().filter(|s| s.class == Some(STRESS)).count();
        StressScore::new((hits as f64 / segs.len() as f64).clamp(0.0, 1.0))
            .expect("clamped ratio")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_rejects_missing_tab() {
        match Lexicon::parse("good\tpositive\nbad negative\n") {
            Err(EmpathyError::Lexicon { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_rejects_conflicting_classes() {
        assert!(Lexicon::parse("x\ta\nx\tb\n").is_err());
        assert_eq!(Lexicon::parse("x\ta\nx\ta\n").unwrap().len(), 1);
    }

    #[test]
    fn mandarin_segmentation_prefers_longest_entry() {
        let lex = Lexicon::parse("不\tneg\n不好\tbad\n好\tgood\n").unwrap();
        let segs = lex.segment("我不好", Language::Zh);
        let got: Vec<_> = segs.iter().map(|s| (s.text.as_str(), s.class)).collect();
        assert_eq!(got, [("我", None), ("不好", Some("bad"))]);
    }

    #[test]
    fn mandarin_entries_do_not_span_punctuation() {
        let lex = Lexicon::parse("不好\tbad\n").unwrap();
        let segs = lex.segment("不，好", Language::Zh);
        assert!(segs.iter().all(|s| s.class.is_none()));
        assert_eq!(segs.len(), 2);
    }
}
