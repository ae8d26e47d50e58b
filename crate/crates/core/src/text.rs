//! Language-aware tokenization shared by the NLU and the lexicon scorers.
//!
//! English splits on whitespace, trims surrounding punctuation and
//! lowercases. Mandarin has no word boundaries, so every CJK character is
//! its own token; runs of ASCII letters and digits stay together.

use crate::lang::Language;

/// A normalized token and its byte span in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

pub fn tokenize(text: &str, lang: Language) -> Vec<Token> {
    match lang {
        Language::En => tokenize_en(text),
        Language::Zh => tokenize_zh(text),
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

fn tokenize_en(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut chunk_start = None;
    let push = |start: usize, end: usize, out: &mut Vec<Token>| {
        let chunk = &text[start..end];
        let Some(first) = chunk.char_indices().find(|(_, c)| is_word_char(*c)) else {
            return;
        };
        let last = chunk
            .char_indices()
            .rev()
            .find(|(_, c)| is_word_char(*c))
            .map(|(i, c)| i + c.len_utf8())
            .unwrap_or(chunk.len());
        out.push(Token {
            text: chunk[first.0..last].to_lowercase(),
            start: start + first.0,
            end: start + last,
        });
    };
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = chunk_start.take() {
                push(s, i, &mut out);
            }
        } else if chunk_start.is_none() {
            chunk_start = Some(i);
        }
    }
    if let Some(s) = chunk_start {
        push(s, text.len(), &mut out);
    }
    out
}

fn tokenize_zh(text: &str) -> Vec<Token> {
    let mut out: Vec<Token> = Vec::new();
    let mut ascii_run: Option<usize> = None;
    let flush = |run: &mut Option<usize>, end: usize, out: &mut Vec<Token>| {
        if let Some(s) = run.take() {
            out.push(Token {
                text: text[s..end].to_lowercase(),
                start: s,
                end,
            });
        }
    };
    for (i, c) in text.char_indices() {
        if c.is_ascii_alphanumeric() || (c == '.' && ascii_run.is_some()) {
            if ascii_run.is_none() {
                ascii_run = Some(i);
            }
            continue;
        }
        flush(&mut ascii_run, i, &mut out);
        if is_word_char(c) {
            out.push(Token {
                text: c.to_string(),
                start: i,
                end: i + c.len_utf8(),
            });
        }
    }
    flush(&mut ascii_run, text.len(), &mut out);
    // A trailing '.' belongs to the sentence, not the number.
    for t in &mut out {
        while t.text.ends_with('.') {
            t.text.pop();
            t.end -= 1;
        }
    }
    out.retain(|t| !t.text.is_empty());
    out
}
