//! Match patterns: literal phrase sets and slot templates.
//!
//! Pattern syntax (one string per pattern):
//!
//! * `yes`, `out of breath`: a literal phrase; its tokens must appear
//!   contiguously in the utterance.
//! * `short & breath`: every `&`-separated phrase must appear.
//! * `grateful because of {object}`: a template. Words match tokens
//!   exactly, `{name}` binds one or more contiguous tokens. A typed
//!   placeholder `{name:type}` only binds spans that end with a word from
//!   the ruleset's `slot_types.type` list.
//!
//! Templates are unanchored. Among all assignments the matcher keeps the
//! leftmost start, then the furthest end, then the longest bindings from
//! left to right.

use std::collections::{BTreeMap, HashSet};

use crate::lang::Language;
use crate::text::{tokenize, Token};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Part {
    Word(String),
    Slot { name: String, kind: Option<String> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatternKind {
    /// All phrases must occur.
    Literal(Vec<Vec<String>>),
    Template(Vec<Part>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub source: String,
    pub kind: PatternKind,
}

/// Token span `[start, end)` bound to a placeholder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binding {
    pub name: String,
    pub start: usize,
    pub end: usize,
}

/// Word lists for typed placeholders, pre-tokenized.
pub type SlotTypes = BTreeMap<String, Vec<Vec<String>>>;

impl Pattern {
    pub fn parse(source: &str, lang: Language) -> Result<Self, String> {
        let trimmed = source.trim();
        if trimmed.is_empty() {
            return Err("empty pattern".into());
        }
        if !trimmed.contains('{') && !trimmed.contains('}') {
            let mut phrases = Vec::new();
            for phrase in trimmed.split('&') {
                let words = words(phrase, lang);
                if words.is_empty() {
                    return Err(format!("pattern `{source}` has an empty phrase"));
                }
                phrases.push(words);
            }
            return Ok(Self {
                source: source.to_string(),
                kind: PatternKind::Literal(phrases),
            });
        }

        let mut parts = Vec::new();
        let mut seen = HashSet::new();
        let mut rest = trimmed;
        while !rest.is_empty() {
            match rest.find('{') {
                Some(open) => {
                    let (lit, tail) = rest.split_at(open);
                    if lit.contains('}') {
                        return Err(format!("unbalanced `}}` in `{source}`"));
                    }
                    parts.extend(words(lit, lang).into_iter().map(Part::Word));
                    let close = tail
                        .find('}')
                        .ok_or_else(|| format!("unclosed placeholder in `{source}`"))?;
                    let inner = &tail[1..close];
                    let (name, kind) = match inner.split_once(':') {
                        Some((n, k)) => (n.trim(), Some(k.trim().to_string())),
                        None => (inner.trim(), None),
                    };
                    if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
                        return Err(format!("bad placeholder name `{inner}` in `{source}`"));
                    }
                    if !seen.insert(name.to_string()) {
                        return Err(format!("duplicate placeholder `{name}` in `{source}`"));
                    }
                    parts.push(Part::Slot {
                        name: name.to_string(),
                        kind,
                    });
                    rest = &tail[close + 1..];
                }
                None => {
                    if rest.contains('}') {
                        return Err(format!("unbalanced `}}` in `{source}`"));
                    }
                    parts.extend(words(rest, lang).into_iter().map(Part::Word));
                    rest = "";
                }
            }
        }
        Ok(Self {
            source: source.to_string(),
            kind: PatternKind::Template(parts),
        })
    }

    pub fn is_template(&self) -> bool {
        matches!(self.kind, PatternKind::Template(_))
    }

    pub fn placeholders(&self) -> Vec<&str> {
        match &self.kind {
            PatternKind::Literal(_) => Vec::new(),
            PatternKind::Template(parts) => parts
                .iter()
                .filter_map(|p| match p {
                    Part::Slot { name, .. } => Some(name.as_str()),
                    Part::Word(_) => None,
                })
                .collect(),
        }
    }

    /// Returns the bindings of the preferred match, or `None`.
    pub fn find(&self, tokens: &[Token], types: &SlotTypes) -> Option<Vec<Binding>> {
        match &self.kind {
            PatternKind::Literal(phrases) => phrases
                .iter()
                .all(|p| contains_phrase(tokens, p))
                .then(Vec::new),
            PatternKind::Template(parts) => match_template(parts, tokens, types),
        }
    }
}

fn words(text: &str, lang: Language) -> Vec<String> {
    tokenize(text, lang).into_iter().map(|t| t.text).collect()
}

fn contains_phrase(tokens: &[Token], phrase: &[String]) -> bool {
    !phrase.is_empty()
        && tokens
            .windows(phrase.len())
            .any(|w| w.iter().zip(phrase).all(|(t, p)| t.text == *p))
}

pub(crate) fn ends_with_any(tokens: &[Token], words: &[Vec<String>]) -> bool {
    words.iter().any(|w| {
        !w.is_empty()
            && w.len() <= tokens.len()
            && tokens[tokens.len() - w.len()..]
                .iter()
                .zip(w)
                .all(|(t, x)| t.text == *x)
    })
}

struct Search<'a> {
    parts: &'a [Part],
    tokens: &'a [Token],
    types: &'a SlotTypes,
    best: Option<(usize, Vec<Binding>)>,
}

impl Search<'_> {
    fn walk(&mut self, part: usize, pos: usize, acc: &mut Vec<Binding>) {
        if part == self.parts.len() {
            self.offer(pos, acc);
            return;
        }
        match &self.parts[part] {
            Part::Word(w) => {
                if self.tokens.get(pos).is_some_and(|t| t.text == *w) {
                    self.walk(part + 1, pos + 1, acc);
                }
            }
            Part::Slot { name, kind } => {
                for end in pos + 1..=self.tokens.len() {
                    if let Some(kind) = kind {
                        let ok = self
                            .types
                            .get(kind)
                            .is_some_and(|ws| ends_with_any(&self.tokens[pos..end], ws));
                        if !ok {
                            continue;
                        }
                    }
                    acc.push(Binding {
                        name: name.clone(),
                        start: pos,
                        end,
                    });
                    self.walk(part + 1, end, acc);
                    acc.pop();
                }
            }
        }
    }

    fn offer(&mut self, end: usize, acc: &[Binding]) {
        let better = match &self.best {
            None => true,
            Some((best_end, best)) => {
                (end, lengths(acc)) > (*best_end, lengths(best))
            }
        };
        if better {
            self.best = Some((end, acc.to_vec()));
        }
    }
}

fn lengths(bs: &[Binding]) -> Vec<usize> {
    bs.iter().map(|b| b.end - b.start).collect()
}

fn match_template(parts: &[Part], tokens: &[Token], types: &SlotTypes) -> Option<Vec<Binding>> {
    if parts.is_empty() {
        return None;
    }
    for start in 0..tokens.len() {
        let mut search = Search {
            parts,
            tokens,
            types,
            best: None,
        };
        search.walk(0, start, &mut Vec::new());
        if let Some((_, bindings)) = search.best {
            return Some(bindings);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Token> {
        tokenize(s, Language::En)
    }

    #[test]
    fn parses_literals_and_templates() {
        let p = Pattern::parse("short & breath", Language::En).unwrap();
        assert_eq!(
            p.kind,
            PatternKind::Literal(vec![vec!["short".into()], vec!["breath".into()]])
        );
        let t = Pattern::parse("grateful for {object:family}", Language::En).unwrap();
        assert_eq!(t.placeholders(), ["object"]);
        assert!(t.is_template());
    }

    #[test]
    fn rejects_malformed_templates() {
        for bad in ["{a} and {a}", "x {", "x }", "{}", "{a b}", "  ", "a & "] {
            assert!(Pattern::parse(bad, Language::En).is_err(), "{bad}");
        }
    }

    #[test]
    fn literal_phrase_must_be_contiguous() {
        let p = Pattern::parse("out of breath", Language::En).unwrap();
        let none = SlotTypes::new();
        assert!(p.find(&toks("I am out of breath!"), &none).is_some());
        assert!(p.find(&toks("out of my breath"), &none).is_none());
    }

    #[test]
    fn trailing_slot_takes_the_rest() {
        let p = Pattern::parse("grateful because of {object}", Language::En).unwrap();
        let ts = toks("I am very grateful because of my parents");
        let b = p.find(&ts, &SlotTypes::new()).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!((b[0].start, b[0].end), (6, 8));
    }

    #[test]
    fn typed_slot_stops_at_type_word() {
        let mut types = SlotTypes::new();
        types.insert("family".into(), vec![vec!["parents".into()]]);
        let p = Pattern::parse("grateful for {object:family}", Language::En).unwrap();
        let ts = toks("grateful for my parents and my friends");
        let b = p.find(&ts, &types).unwrap();
        assert_eq!((b[0].start, b[0].end), (2, 4));
        assert!(p.find(&toks("grateful for my friends"), &types).is_none());
    }

    #[test]
    fn mandarin_template_binds_characters() {
        let p = Pattern::parse("感恩{object}", Language::Zh).unwrap();
        let ts = tokenize("我很感恩我的父母", Language::Zh);
        let b = p.find(&ts, &SlotTypes::new()).unwrap();
        assert_eq!((b[0].start, b[0].end), (4, 8));
    }
}
