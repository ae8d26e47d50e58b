//! Rule-based intent classification and slot extraction.
//!
//! A [`Ruleset`] holds prioritized [`IntentRule`]s loaded from a TOML
//! document (see [`Ruleset::parse`]). [`classify`] returns the intent of
//! the highest-priority rule with a matching pattern, ties going to the
//! rule that appears first in the file. Confidence is fixed per pattern
//! kind: [`LITERAL_CONFIDENCE`] for literal phrases,
//! [`TEMPLATE_CONFIDENCE`] for slot templates and 0 for the fallback.

mod number;
mod pattern;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use number::{count_reached, parse_mandarin_numeral, parse_number};
pub use pattern::{Binding, Part, Pattern, PatternKind, SlotTypes};

use crate::error::ErrorKind;
use crate::lang::Language;
use crate::text::{tokenize, Token};

pub const LITERAL_CONFIDENCE: f64 = 1.0;
pub const TEMPLATE_CONFIDENCE: f64 = 0.8;
pub const FALLBACK_INTENT: &str = "fallback";

/// Shipped rulesets.
pub const EN_RULES: &str = include_str!("../../rules/en.rules");
pub const ZH_RULES: &str = include_str!("../../rules/zh.rules");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NluError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("rule `{0}` does not match the utterance")]
    NoMatch(String),
    #[error("ruleset parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid rule #{index} (`{intent}`): {reason}")]
    Validation {
        index: usize,
        intent: String,
        reason: String,
    },
}

impl NluError {
    pub fn kind(&self) -> ErrorKind {
        ErrorKind::InvalidInput
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InputSource {
    #[default]
    Typed,
    SpeechAdapter,
}

/// One user turn as text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub text: String,
    pub language: Language,
    pub source: InputSource,
}

impl Utterance {
    pub fn new(text: impl Into<String>, language: Language) -> Result<Self, NluError> {
        Self::with_source(text, language, InputSource::Typed)
    }

    pub fn with_source(
        text: impl Into<String>,
        language: Language,
        source: InputSource,
    ) -> Result<Self, NluError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(NluError::InvalidInput("utterance is empty".into()));
        }
        Ok(Self {
            text,
            language,
            source,
        })
    }

    pub fn tokens(&self) -> Vec<Token> {
        tokenize(&self.text, self.language)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntentRule {
    /// `<lang>/<intent>/<position in file>`
    pub id: String,
    pub intent: String,
    pub language: Language,
    pub patterns: Vec<Pattern>,
    pub priority: u32,
}

pub type SlotMap = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentFrame {
    pub intent: String,
    pub slots: SlotMap,
    pub confidence: f64,
    pub matched_rule: Option<String>,
}

impl IntentFrame {
    pub fn fallback() -> Self {
        Self {
            intent: FALLBACK_INTENT.to_string(),
            slots: SlotMap::new(),
            confidence: 0.0,
            matched_rule: None,
        }
    }

    /// A frame produced outside the NLU (e.g. the console's continue
    /// button).
    pub fn synthetic(intent: &str) -> Self {
        Self {
            intent: intent.to_string(),
            slots: SlotMap::new(),
            confidence: LITERAL_CONFIDENCE,
            matched_rule: None,
        }
    }

    pub fn is(&self, intent: &str) -> bool {
        self.intent == intent
    }
}

/// Validated rules, sorted by priority (descending, stable).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ruleset {
    rules: Vec<IntentRule>,
    /// Leading words dropped when normalizing a slot to its head.
    slot_strip: Vec<Vec<String>>,
    slot_types: SlotTypes,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RulesetDoc {
    #[serde(default)]
    slot_strip: Vec<String>,
    #[serde(default)]
    slot_types: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    rule: Vec<RuleDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleDoc {
    intent: String,
    lang: String,
    priority: i64,
    patterns: Vec<String>,
}

fn line_col(doc: &str, offset: usize) -> (usize, usize) {
    let before = &doc[..offset.min(doc.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

impl Ruleset {
    /// Parses and validates a ruleset document.
    ///
    /// ```toml
    /// slot_strip = ["my", "the"]            # optional
    /// slot_types.family = ["parents", "mom"] # optional
    ///
    /// [[rule]]
    /// intent = "affirm"
    /// lang = "en"
    /// priority = 10
    /// patterns = ["yes", "of course"]
    /// ```
    pub fn parse(doc: &str) -> Result<Self, NluError> {
        let parsed: RulesetDoc = toml::from_str(doc).map_err(|e| {
            let (line, column) = e.span().map_or((1, 1), |s| line_col(doc, s.start));
            NluError::Parse {
                line,
                column,
                message: e.message().to_string(),
            }
        })?;

        let mut rules = Vec::with_capacity(parsed.rule.len());
        let mut seen_pairs = HashSet::new();
        for (index, r) in parsed.rule.into_iter().enumerate() {
            let invalid = |reason: String| NluError::Validation {
                index,
                intent: r.intent.clone(),
                reason,
            };
            if r.intent.trim().is_empty() || r.intent == FALLBACK_INTENT {
                return Err(invalid("intent must be a non-empty label other than `fallback`".into()));
            }
            let language: Language = r.lang.parse().map_err(|e: crate::lang::UnknownLanguage| invalid(e.to_string()))?;
            let priority = u32::try_from(r.priority)
                .map_err(|_| invalid(format!("priority {} must be a non-negative integer", r.priority)))?;
            if r.patterns.is_empty() {
                return Err(invalid("rule has no patterns".into()));
            }
            let mut patterns = Vec::with_capacity(r.patterns.len());
            for src in &r.patterns {
                let p = Pattern::parse(src, language).map_err(invalid)?;
                if let PatternKind::Template(parts) = &p.kind {
                    for part in parts {
                        if let Part::Slot { kind: Some(k), .. } = part {
                            if !parsed.slot_types.contains_key(k) {
                                return Err(invalid(format!("unknown slot type `{k}`")));
                            }
                        }
                    }
                }
                if !seen_pairs.insert((r.intent.clone(), language, p.source.trim().to_string())) {
                    return Err(invalid(format!("duplicate pattern `{src}` for this intent")));
                }
                patterns.push(p);
            }
            rules.push(IntentRule {
                id: format!("{}/{}/{}", language, r.intent, index),
                intent: r.intent,
                language,
                patterns,
                priority,
            });
        }
        // stable: equal priorities keep file order
        rules.sort_by(|a, b| b.priority.cmp(&a.priority));

        let words = |s: &str| -> Vec<Vec<String>> {
            Language::ALL
                .iter()
                .map(|l| tokenize(s, *l).into_iter().map(|t| t.text).collect::<Vec<_>>())
                .filter(|w| !w.is_empty())
                .collect::<Vec<_>>()
        };
        let slot_strip = parsed.slot_strip.iter().flat_map(|s| words(s)).collect();
        let slot_types = parsed
            .slot_types
            .iter()
            .map(|(k, vs)| (k.clone(), vs.iter().flat_map(|v| words(v)).collect()))
            .collect();
        Ok(Self {
            rules,
            slot_strip,
            slot_types,
        })
    }

    /// The shipped ruleset for a language.
    pub fn shipped(lang: Language) -> Self {
        let doc = match lang {
            Language::En => EN_RULES,
            Language::Zh => ZH_RULES,
        };
        Self::parse(doc).expect("shipped ruleset is valid")
    }

    pub fn rules(&self) -> &[IntentRule] {
        &self.rules
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn intents(&self) -> impl Iterator<Item = &str> {
        let mut seen = HashSet::new();
        self.rules
            .iter()
            .map(|r| r.intent.as_str())
            .filter(move |i| seen.insert(*i))
    }

    pub fn slot_types(&self) -> &SlotTypes {
        &self.slot_types
    }

    /// Drops leading strip words while at least one token remains.
    fn head<'a>(&self, mut tokens: &'a [Token]) -> &'a [Token] {
        'outer: loop {
            for w in &self.slot_strip {
                if w.len() < tokens.len()
                    && tokens[..w.len()].iter().zip(w).all(|(t, x)| t.text == *x)
                {
                    tokens = &tokens[w.len()..];
                    continue 'outer;
                }
            }
            return tokens;
        }
    }
}

fn span_text<'a>(text: &'a str, tokens: &[Token]) -> &'a str {
    match (tokens.first(), tokens.last()) {
        (Some(a), Some(b)) => &text[a.start..b.end],
        _ => "",
    }
}

fn bindings_to_slots(text: &str, tokens: &[Token], bindings: &[Binding]) -> SlotMap {
    bindings
        .iter()
        .map(|b| (b.name.clone(), span_text(text, &tokens[b.start..b.end]).to_string()))
        .collect()
}

/// Raw slot bindings of the first pattern of `rule` that matches.
///
/// Every value is a contiguous substring of `u.text`; bindings of one
/// match never overlap.
pub fn extract_slots(u: &Utterance, rule: &IntentRule, ruleset: &Ruleset) -> Result<SlotMap, NluError> {
    let tokens = u.tokens();
    for p in &rule.patterns {
        if let Some(bindings) = p.find(&tokens, &ruleset.slot_types) {
            return Ok(bindings_to_slots(&u.text, &tokens, &bindings));
        }
    }
    Err(NluError::NoMatch(rule.id.clone()))
}

/// Classifies an utterance. Rules for other languages are skipped.
pub fn classify(u: &Utterance, ruleset: &Ruleset) -> Result<IntentFrame, NluError> {
    if u.text.trim().is_empty() {
        return Err(NluError::InvalidInput("utterance is empty".into()));
    }
    let tokens = u.tokens();
    for rule in ruleset.rules.iter().filter(|r| r.language == u.language) {
        for p in &rule.patterns {
            let Some(bindings) = p.find(&tokens, &ruleset.slot_types) else {
                continue;
            };
            let slots = bindings
                .iter()
                .map(|b| {
                    let head = ruleset.head(&tokens[b.start..b.end]);
                    (b.name.clone(), span_text(&u.text, head).to_string())
                })
                .collect();
            return Ok(IntentFrame {
                intent: rule.intent.clone(),
                slots,
                confidence: if p.is_template() {
                    TEMPLATE_CONFIDENCE
                } else {
                    LITERAL_CONFIDENCE
                },
                matched_rule: Some(rule.id.clone()),
            });
        }
    }
    Ok(IntentFrame::fallback())
}
