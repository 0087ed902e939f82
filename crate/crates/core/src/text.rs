//! Tokenization shared by the knowledge base, the semantic index and the
//! fixture embedder.

use std::collections::HashSet;
use std::sync::OnceLock;

const STOPWORD_LIST: &str = include_str!("../data/stopwords.txt");

/// A word token with its byte span in the source string.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'a> {
    pub text: &'a str,
    pub start: usize,
    pub end: usize,
}

impl Token<'_> {
    pub fn folded(&self) -> String {
        self.text.to_lowercase()
    }
}

/// Splits `text` into maximal runs of alphabetic characters.
///
/// Apostrophes, digits and punctuation all break tokens, so "Hutt's" yields
/// `Hutt` and `s`.
pub fn alpha_tokens(text: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        if c.is_alphabetic() {
            if start.is_none() {
                start = Some(i);
            }
        } else if let Some(s) = start.take() {
            out.push(Token {
                text: &text[s..i],
                start: s,
                end: i,
            });
        }
    }
    if let Some(s) = start {
        out.push(Token {
            text: &text[s..],
            start: s,
            end: text.len(),
        });
    }
    out
}

/// The fixed English stopword list shipped with the crate.
pub fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        STOPWORD_LIST
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect()
    })
}

pub fn is_stopword(word: &str) -> bool {
    stopwords().contains(word.to_lowercase().as_str())
}

/// Alphabetic tokens that are not stopwords, in source order.
pub fn content_tokens(text: &str) -> Vec<Token<'_>> {
    alpha_tokens(text)
        .into_iter()
        .filter(|t| !is_stopword(t.text))
        .collect()
}

/// Case-folds and collapses internal whitespace; used as a dedup key.
pub fn fold_key(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Returns true if the only thing between two byte offsets is whitespace.
pub(crate) fn whitespace_between(text: &str, a: usize, b: usize) -> bool {
    a <= b && text[a..b].chars().all(char::is_whitespace) && a != b
}
