//! Coreference resolution contract and the resolvers shipped with the crate.
//!
//! A resolver sees the whole document (all raw sentences) and answers with a
//! list of span substitutions. Applying them is done here, so a resolver can
//! never change text outside the spans it names.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{KbError, PlotSentence};
use crate::diagnostics::{Diagnostics, WarningKind};
use crate::text::alpha_tokens;

#[derive(Debug, Error)]
#[error("coreference resolver failed: {0}")]
pub struct ResolverError(pub String);

/// Replace `raw[start..end]` of sentence `sentence` with `replacement`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Substitution {
    pub sentence: usize,
    pub start: usize,
    pub end: usize,
    pub replacement: String,
}

pub trait CoreferenceResolver {
    fn resolve(&self, sentences: &[String]) -> Result<Vec<Substitution>, ResolverError>;
}

/// Leaves every sentence untouched.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityResolver;

impl CoreferenceResolver for IdentityResolver {
    fn resolve(&self, _sentences: &[String]) -> Result<Vec<Substitution>, ResolverError> {
        Ok(Vec::new())
    }
}

/// One row of a hand-written (or externally produced) substitution table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordSubstitution {
    pub sentence: usize,
    pub word: String,
    pub replacement: String,
}

/// Resolver driven by a word-level table: in sentence `sentence`, every
/// whole-word occurrence of `word` becomes `replacement`.
///
/// This is the adapter for coreference output produced offline by an external
/// tool and stored as JSON (a list of `{sentence, word, replacement}` rows).
#[derive(Debug, Clone, Default)]
pub struct TableResolver {
    rows: Vec<WordSubstitution>,
}

impl TableResolver {
    pub fn new(rows: Vec<WordSubstitution>) -> Self {
        Self { rows }
    }

    pub fn from_json_file(path: &Path) -> Result<Self, KbError> {
        let text = std::fs::read_to_string(path).map_err(|e| KbError::io(path, e))?;
        let rows: Vec<WordSubstitution> =
            serde_json::from_str(&text).map_err(|e| KbError::InvalidData(format!("{}: {e}", path.display())))?;
        Ok(Self::new(rows))
    }
}

impl CoreferenceResolver for TableResolver {
    fn resolve(&self, sentences: &[String]) -> Result<Vec<Substitution>, ResolverError> {
        let mut subs = Vec::new();
        for row in &self.rows {
            let sentence = sentences
                .get(row.sentence)
                .ok_or_else(|| ResolverError(format!("sentence {} out of range", row.sentence)))?;
            let word_tokens: Vec<_> = alpha_tokens(&row.word).into_iter().map(|t| t.text).collect();
            if word_tokens.len() != 1 || word_tokens[0] != row.word {
                return Err(ResolverError(format!("'{}' is not a single word", row.word)));
            }
            for tok in alpha_tokens(sentence).into_iter().filter(|t| t.text == row.word) {
                subs.push(Substitution {
                    sentence: row.sentence,
                    start: tok.start,
                    end: tok.end,
                    replacement: row.replacement.clone(),
                });
            }
        }
        Ok(subs)
    }
}

fn apply(sentences: &[String], subs: Vec<Substitution>) -> Result<Vec<String>, ResolverError> {
    let mut per_sentence: BTreeMap<usize, Vec<Substitution>> = BTreeMap::new();
    for sub in subs {
        let sentence = sentences
            .get(sub.sentence)
            .ok_or_else(|| ResolverError(format!("sentence {} out of range", sub.sentence)))?;
        if sub.start >= sub.end
            || sub.end > sentence.len()
            || !sentence.is_char_boundary(sub.start)
            || !sentence.is_char_boundary(sub.end)
        {
            return Err(ResolverError(format!(
                "invalid span {}..{} in sentence {}",
                sub.start, sub.end, sub.sentence
            )));
        }
        if sub.replacement.trim().is_empty() {
            return Err(ResolverError(format!("empty replacement in sentence {}", sub.sentence)));
        }
        per_sentence.entry(sub.sentence).or_default().push(sub);
    }

    let mut out = sentences.to_vec();
    for (idx, mut subs) in per_sentence {
        subs.sort_by_key(|s| (s.start, s.end));
        subs.dedup();
        if subs.windows(2).any(|w| w[1].start < w[0].end) {
            return Err(ResolverError(format!("overlapping spans in sentence {idx}")));
        }
        let raw = &sentences[idx];
        let mut resolved = String::with_capacity(raw.len());
        let mut cursor = 0;
        for sub in &subs {
            resolved.push_str(&raw[cursor..sub.start]);
            resolved.push_str(&sub.replacement);
            cursor = sub.end;
        }
        resolved.push_str(&raw[cursor..]);
        out[idx] = resolved;
    }
    Ok(out)
}

/// Resolves pronouns across the document.
///
/// A failing resolver (or one that returns malformed spans) degrades to
/// identity resolution with a warning; ingestion never aborts here.
pub fn resolve_coreferences(
    sentences: &[String],
    resolver: &dyn CoreferenceResolver,
    diag: &mut Diagnostics,
) -> Result<Vec<PlotSentence>, KbError> {
    if sentences.is_empty() {
        return Err(KbError::InvalidInput("no sentences to resolve".into()));
    }
    let resolved = match resolver.resolve(sentences).and_then(|subs| apply(sentences, subs)) {
        Ok(resolved) => resolved,
        Err(e) => {
            diag.warn(WarningKind::ResolverFailure, format!("{e}; using identity resolution"));
            sentences.to_vec()
        }
    };
    Ok(sentences
        .iter()
        .zip(resolved)
        .enumerate()
        .map(|(index, (raw, resolved_text))| PlotSentence {
            index,
            raw_text: raw.clone(),
            resolved_text,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Failing;
    impl CoreferenceResolver for Failing {
        fn resolve(&self, _: &[String]) -> Result<Vec<Substitution>, ResolverError> {
            Err(ResolverError("model not loaded".into()))
        }
    }

    fn doc() -> Vec<String> {
        vec!["Luke trains.".into(), "He falls.".into()]
    }

    #[test]
    fn identity_keeps_raw_text() {
        let mut diag = Diagnostics::new();
        let out = resolve_coreferences(&["Luke trains. ".to_string()], &IdentityResolver, &mut diag).unwrap();
        assert_eq!(out[0].resolved_text, out[0].raw_text);
        assert!(diag.is_empty());
    }

    #[test]
    fn table_resolver_substitutes_designated_word() {
        let resolver = TableResolver::new(vec![WordSubstitution {
            sentence: 1,
            word: "He".into(),
            replacement: "Luke".into(),
        }]);
        let mut diag = Diagnostics::new();
        let out = resolve_coreferences(&doc(), &resolver, &mut diag).unwrap();
        assert_eq!(out[0].resolved_text, "Luke trains.");
        assert_eq!(out[1].resolved_text, "Luke falls.");
        assert_eq!(out[1].raw_text, "He falls.");
    }

    #[test]
    fn whole_word_only() {
        let resolver = TableResolver::new(vec![WordSubstitution {
            sentence: 0,
            word: "he".into(),
            replacement: "Han".into(),
        }]);
        let mut diag = Diagnostics::new();
        let out = resolve_coreferences(&["Then he hears the echo.".to_string()], &resolver, &mut diag).unwrap();
        assert_eq!(out[0].resolved_text, "Then Han hears the echo.");
    }

    #[test]
    fn failing_resolver_degrades_to_identity() {
        let mut diag = Diagnostics::new();
        let out = resolve_coreferences(&doc(), &Failing, &mut diag).unwrap();
        let identity = resolve_coreferences(&doc(), &IdentityResolver, &mut Diagnostics::new()).unwrap();
        assert_eq!(out, identity);
        assert_eq!(diag.count(WarningKind::ResolverFailure), 1);
    }

    #[test]
    fn malformed_spans_degrade_to_identity() {
        struct Overlapping;
        impl CoreferenceResolver for Overlapping {
            fn resolve(&self, _: &[String]) -> Result<Vec<Substitution>, ResolverError> {
                Ok(vec![
                    Substitution { sentence: 1, start: 0, end: 2, replacement: "Luke".into() },
                    Substitution { sentence: 1, start: 1, end: 3, replacement: "X".into() },
                ])
            }
        }
        let mut diag = Diagnostics::new();
        let out = resolve_coreferences(&doc(), &Overlapping, &mut diag).unwrap();
        assert_eq!(out[1].resolved_text, "He falls.");
        assert_eq!(diag.count(WarningKind::ResolverFailure), 1);
    }

    #[test]
    fn out_of_range_table_row_degrades() {
        let resolver = TableResolver::new(vec![WordSubstitution {
            sentence: 9,
            word: "He".into(),
            replacement: "Luke".into(),
        }]);
        let mut diag = Diagnostics::new();
        let out = resolve_coreferences(&doc(), &resolver, &mut diag).unwrap();
        assert_eq!(out[1].resolved_text, "He falls.");
        assert_eq!(diag.count(WarningKind::ResolverFailure), 1);
    }
}
