//! Entity extraction: tagger spans plus TF-IDF terms, ranked by salience
//! against a generic reference corpus.
//!
//! Salience is `tf * ln((N + 1) / (df + 1))` where `tf` is the number of
//! case-folded occurrences of the name in the plot, `N` is the number of
//! reference documents and `df` the number of reference documents containing
//! the name. A term present in every reference document scores zero.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Entity, EntityCategory, KbError, PlotSentence};
use crate::diagnostics::{Diagnostics, WarningKind};
use crate::text::{alpha_tokens, fold_key, is_stopword, whitespace_between, Token};

pub const MAX_PER_CATEGORY: usize = 10;
const MIN_TERM_CHARS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagLabel {
    Person,
    Organization,
    Location,
    Misc,
}

impl TagLabel {
    pub fn category(self) -> EntityCategory {
        match self {
            TagLabel::Person => EntityCategory::Person,
            TagLabel::Organization => EntityCategory::Organization,
            TagLabel::Location => EntityCategory::Location,
            TagLabel::Misc => EntityCategory::Object,
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "person" | "per" => Some(TagLabel::Person),
            "organization" | "org" => Some(TagLabel::Organization),
            "location" | "loc" => Some(TagLabel::Location),
            "misc" | "object" => Some(TagLabel::Misc),
            _ => None,
        }
    }
}

/// A named-entity span within one sentence, as byte offsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedSpan {
    pub start: usize,
    pub end: usize,
    pub label: TagLabel,
}

#[derive(Debug, Error)]
#[error("entity tagger failed: {0}")]
pub struct TaggerError(pub String);

pub trait EntityTagger {
    fn tag(&self, sentence: &str) -> Result<Vec<TaggedSpan>, TaggerError>;
}

/// Tags nothing; extraction then falls back to TF-IDF terms only.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullTagger;

impl EntityTagger for NullTagger {
    fn tag(&self, _sentence: &str) -> Result<Vec<TaggedSpan>, TaggerError> {
        Ok(Vec::new())
    }
}

/// Dictionary tagger: case-sensitive, whole-token matches of known names,
/// longest names first.
#[derive(Debug, Clone, Default)]
pub struct GazetteerTagger {
    entries: Vec<(Vec<String>, TagLabel)>,
}

impl GazetteerTagger {
    pub fn new<'a>(entries: impl IntoIterator<Item = (&'a str, TagLabel)>) -> Self {
        let mut entries: Vec<(Vec<String>, TagLabel)> = entries
            .into_iter()
            .map(|(name, label)| {
                (
                    name_tokens(name).into_iter().map(|(_, _, t)| t.to_string()).collect::<Vec<String>>(),
                    label,
                )
            })
            .filter(|(toks, _)| !toks.is_empty())
            .collect();
        entries.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        Self { entries }
    }

    /// Reads `name<TAB>label` rows; `#` starts a comment line.
    pub fn from_tsv_file(path: &Path) -> Result<Self, KbError> {
        let text = std::fs::read_to_string(path).map_err(|e| KbError::io(path, e))?;
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (name, label) = line.split_once('\t').ok_or_else(|| {
                KbError::InvalidData(format!("{}:{}: expected name<TAB>label", path.display(), lineno + 1))
            })?;
            let label = TagLabel::parse(label).ok_or_else(|| {
                KbError::InvalidData(format!("{}:{}: unknown label '{label}'", path.display(), lineno + 1))
            })?;
            rows.push((name.trim().to_string(), label));
        }
        Ok(Self::new(rows.iter().map(|(n, l)| (n.as_str(), *l))))
    }
}

/// Maximal alphanumeric runs, so names like `R2-D2` keep their digits.
fn name_tokens(text: &str) -> Vec<(usize, usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices().chain(std::iter::once((text.len(), ' '))) {
        match (c.is_alphanumeric(), start) {
            (true, None) => start = Some(i),
            (false, Some(st)) => {
                out.push((st, i, &text[st..i]));
                start = None;
            }
            _ => {}
        }
    }
    out
}

impl EntityTagger for GazetteerTagger {
    fn tag(&self, sentence: &str) -> Result<Vec<TaggedSpan>, TaggerError> {
        let tokens: Vec<Token<'_>> = name_tokens(sentence)
            .into_iter()
            .map(|(start, end, text)| Token { text, start, end })
            .collect();
        let mut spans = Vec::new();
        for (name, label) in &self.entries {
            let len = name.len();
            if len > tokens.len() {
                continue;
            }
            for i in 0..=tokens.len() - len {
                let window = &tokens[i..i + len];
                if window.iter().zip(name).all(|(t, n)| t.text == n) {
                    spans.push(TaggedSpan {
                        start: window[0].start,
                        end: window[len - 1].end,
                        label: *label,
                    });
                }
            }
        }
        Ok(spans)
    }
}

/// Generic documents used for the inverse-document-frequency contrast.
#[derive(Debug, Clone, Default)]
pub struct ReferenceCorpus {
    docs: Vec<Vec<String>>,
    ngram_sets: Vec<HashSet<String>>,
}

impl ReferenceCorpus {
    pub fn from_texts<S: AsRef<str>>(texts: &[S]) -> Self {
        let docs: Vec<Vec<String>> = texts
            .iter()
            .map(|t| alpha_tokens(t.as_ref()).iter().map(Token::folded).collect())
            .collect();
        let ngram_sets = docs
            .iter()
            .map(|toks| {
                let mut set: HashSet<String> = toks.iter().cloned().collect();
                set.extend(toks.windows(2).map(|w| format!("{} {}", w[0], w[1])));
                set
            })
            .collect();
        Self { docs, ngram_sets }
    }

    /// Loads every `*.txt` file in `dir`, in file-name order.
    pub fn load_dir(dir: &Path) -> Result<Self, KbError> {
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| KbError::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        paths.sort();
        let texts = paths
            .iter()
            .map(|p| std::fs::read_to_string(p).map_err(|e| KbError::io(p, e)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_texts(&texts))
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Number of documents containing the folded token sequence.
    pub fn document_frequency(&self, phrase: &[String]) -> usize {
        match phrase.len() {
            0 => 0,
            1 | 2 => {
                let key = phrase.join(" ");
                self.ngram_sets.iter().filter(|s| s.contains(&key)).count()
            }
            n => self
                .docs
                .iter()
                .filter(|doc| doc.windows(n).any(|w| w == phrase))
                .count(),
        }
    }

    pub fn idf(&self, phrase: &[String]) -> f64 {
        let n = self.docs.len() as f64;
        ((n + 1.0) / (self.document_frequency(phrase) as f64 + 1.0)).ln()
    }
}

struct Candidate {
    name: String,
    category: EntityCategory,
    folded_tokens: Vec<String>,
    first_sentence: usize,
    tf: usize,
}

fn fold_tokens(text: &str) -> Vec<String> {
    alpha_tokens(text).iter().map(Token::folded).collect()
}

fn count_occurrences(corpus: &[Vec<String>], phrase: &[String]) -> (usize, Option<usize>) {
    let mut total = 0;
    let mut first = None;
    for (i, sent) in corpus.iter().enumerate() {
        if phrase.is_empty() || phrase.len() > sent.len() {
            continue;
        }
        let c = sent.windows(phrase.len()).filter(|w| *w == phrase).count();
        if c > 0 && first.is_none() {
            first = Some(i);
        }
        total += c;
    }
    (total, first)
}

/// Keeps the longest of any overlapping spans; ties go to the earlier span.
fn resolve_overlaps(mut spans: Vec<TaggedSpan>) -> Vec<TaggedSpan> {
    spans.sort_by(|a, b| {
        (b.end - b.start)
            .cmp(&(a.end - a.start))
            .then(a.start.cmp(&b.start))
    });
    let mut kept: Vec<TaggedSpan> = Vec::new();
    for s in spans {
        if kept.iter().all(|k| s.end <= k.start || s.start >= k.end) {
            kept.push(s);
        }
    }
    kept.sort_by_key(|s| s.start);
    kept
}

/// Extracts and ranks entities for one domain.
///
/// Person, organization and location come from the tagger; tagger `misc`
/// spans and untagged unigram/bigram terms form the object pool. Untagged
/// bigrams are only considered when they recur, and a recurring bigram
/// claims its tokens (longest span wins). Any term sharing a word with a
/// tagged name is left to the tagger.
pub fn extract_entities(
    sentences: &[PlotSentence],
    tagger: &dyn EntityTagger,
    reference: &ReferenceCorpus,
    max_per_category: usize,
    diag: &mut Diagnostics,
) -> Result<Vec<Entity>, KbError> {
    if sentences.is_empty() {
        return Err(KbError::InvalidInput("no sentences to extract entities from".into()));
    }
    if reference.len() < 2 {
        return Err(KbError::InvalidInput(format!(
            "reference corpus needs at least 2 documents, found {}",
            reference.len()
        )));
    }

    let corpus: Vec<Vec<String>> = sentences.iter().map(|s| fold_tokens(&s.resolved_text)).collect();

    // Tagger pass.
    let mut tagged: Vec<Vec<TaggedSpan>> = Vec::with_capacity(sentences.len());
    for s in sentences {
        let text = &s.resolved_text;
        let spans = match tagger.tag(text) {
            Ok(spans) => spans
                .into_iter()
                .filter(|sp| {
                    sp.start < sp.end
                        && sp.end <= text.len()
                        && text.is_char_boundary(sp.start)
                        && text.is_char_boundary(sp.end)
                })
                .collect(),
            Err(e) => {
                diag.warn(WarningKind::TaggerFailure, format!("sentence {}: {e}", s.index));
                Vec::new()
            }
        };
        tagged.push(resolve_overlaps(spans));
    }

    let mut candidates: Vec<Candidate> = Vec::new();
    let mut by_key: HashMap<String, usize> = HashMap::new();
    let mut tagged_words: HashSet<String> = HashSet::new();
    for (s, spans) in sentences.iter().zip(&tagged) {
        for sp in spans {
            let surface = s.resolved_text[sp.start..sp.end].trim().to_string();
            let key = fold_key(&surface);
            let folded_tokens = fold_tokens(&surface);
            if folded_tokens.is_empty() || by_key.contains_key(&key) {
                continue;
            }
            tagged_words.extend(folded_tokens.iter().cloned());
            by_key.insert(key, candidates.len());
            candidates.push(Candidate {
                name: surface,
                category: sp.label.category(),
                folded_tokens,
                first_sentence: s.index,
                tf: 0,
            });
        }
    }
    for c in &mut candidates {
        let (tf, _) = count_occurrences(&corpus, &c.folded_tokens);
        // A tagged span always counts at least once even if tokenization of
        // its surface differs from the sentence tokenization.
        c.tf = tf.max(1);
    }

    // TF-IDF term pass over untagged tokens.
    let mut eligible: Vec<Vec<Token<'_>>> = Vec::with_capacity(sentences.len());
    for (s, spans) in sentences.iter().zip(&tagged) {
        let toks = alpha_tokens(&s.resolved_text)
            .into_iter()
            .filter(|t| {
                !spans.iter().any(|sp| t.start < sp.end && t.end > sp.start)
                    && t.text.chars().count() >= MIN_TERM_CHARS
                    && !is_stopword(t.text)
                    && !tagged_words.contains(&t.folded())
            })
            .collect();
        eligible.push(toks);
    }

    let adjacent = |text: &str, a: &Token<'_>, b: &Token<'_>| whitespace_between(text, a.end, b.start);

    let mut bigram_counts: HashMap<String, usize> = HashMap::new();
    for (s, toks) in sentences.iter().zip(&eligible) {
        for w in toks.windows(2) {
            if adjacent(&s.resolved_text, &w[0], &w[1]) {
                *bigram_counts.entry(format!("{} {}", w[0].folded(), w[1].folded())).or_default() += 1;
            }
        }
    }

    struct TermStat {
        name: String,
        folded_tokens: Vec<String>,
        first_sentence: usize,
        tf: usize,
    }
    let mut terms: BTreeMap<String, TermStat> = BTreeMap::new();
    for (s, toks) in sentences.iter().zip(&eligible) {
        let text = &s.resolved_text;
        let mut i = 0;
        while i < toks.len() {
            let is_bigram = i + 1 < toks.len()
                && adjacent(text, &toks[i], &toks[i + 1])
                && bigram_counts
                    .get(&format!("{} {}", toks[i].folded(), toks[i + 1].folded()))
                    .is_some_and(|&c| c >= 2);
            let (surface, folded_tokens, step) = if is_bigram {
                (
                    text[toks[i].start..toks[i + 1].end].to_string(),
                    vec![toks[i].folded(), toks[i + 1].folded()],
                    2,
                )
            } else {
                (toks[i].text.to_string(), vec![toks[i].folded()], 1)
            };
            let key = folded_tokens.join(" ");
            if !by_key.contains_key(&key) {
                terms
                    .entry(key)
                    .or_insert_with(|| TermStat {
                        name: surface,
                        folded_tokens,
                        first_sentence: s.index,
                        tf: 0,
                    })
                    .tf += 1;
            }
            i += step;
        }
    }
    for (key, t) in terms {
        by_key.insert(key, candidates.len());
        candidates.push(Candidate {
            name: t.name,
            category: EntityCategory::Object,
            folded_tokens: t.folded_tokens,
            first_sentence: t.first_sentence,
            tf: t.tf,
        });
    }

    let mut per_category: BTreeMap<EntityCategory, Vec<Entity>> = BTreeMap::new();
    for c in candidates {
        let salience = c.tf as f64 * reference.idf(&c.folded_tokens);
        per_category.entry(c.category).or_default().push(Entity {
            name: c.name,
            category: c.category,
            salience,
            rank: 0,
            first_sentence: c.first_sentence,
        });
    }

    let mut out = Vec::new();
    for (_, mut list) in per_category {
        list.sort_by(|a, b| {
            b.salience
                .partial_cmp(&a.salience)
                .unwrap_or(Ordering::Equal)
                .then(a.first_sentence.cmp(&b.first_sentence))
                .then_with(|| fold_key(&a.name).cmp(&fold_key(&b.name)))
        });
        list.truncate(max_per_category);
        for (i, e) in list.iter_mut().enumerate() {
            e.rank = i + 1;
        }
        out.extend(list);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sentences(texts: &[&str]) -> Vec<PlotSentence> {
        texts
            .iter()
            .enumerate()
            .map(|(index, t)| PlotSentence {
                index,
                raw_text: t.to_string(),
                resolved_text: t.to_string(),
            })
            .collect()
    }

    fn reference() -> ReferenceCorpus {
        ReferenceCorpus::from_texts(&[
            "The city was founded in the year of the great river flood.",
            "The city has a river port and an old market.",
            "A river runs through the valley near the city.",
        ])
    }

    #[test]
    fn gazetteer_prefers_longest_name() {
        let tagger = GazetteerTagger::new([("Luke", TagLabel::Person), ("Luke Skywalker", TagLabel::Person)]);
        let spans = resolve_overlaps(tagger.tag("Then Luke Skywalker met Luke.").unwrap());
        assert_eq!(spans.len(), 2);
        assert_eq!((spans[0].start, spans[0].end), (5, 19));
        assert_eq!((spans[1].start, spans[1].end), (24, 28));
    }

    #[test]
    fn null_tagger_yields_only_objects() {
        let sents = sentences(&["Luke grabs the antenna.", "Luke escapes the city."]);
        let ents = extract_entities(&sents, &NullTagger, &reference(), 10, &mut Diagnostics::new()).unwrap();
        assert!(!ents.is_empty());
        assert!(ents.iter().all(|e| e.category == EntityCategory::Object));
    }

    #[test]
    fn ubiquitous_reference_term_scores_no_higher_than_unique_term() {
        // "river" appears in all reference documents, "droid" in none; both once in the plot.
        let sents = sentences(&["A droid crosses the river."]);
        let ents = extract_entities(&sents, &NullTagger, &reference(), 10, &mut Diagnostics::new()).unwrap();
        let get = |n: &str| ents.iter().find(|e| e.name == n).unwrap().salience;
        assert_eq!(get("river"), 0.0);
        assert!(get("river") <= get("droid"));
        assert!((get("droid") - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn tagger_terms_are_excluded_from_object_pool() {
        let tagger = GazetteerTagger::new([("Darth Vader", TagLabel::Person)]);
        let sents = sentences(&["Darth Vader hunts.", "Vader broods on the bridge."]);
        let ents = extract_entities(&sents, &tagger, &reference(), 10, &mut Diagnostics::new()).unwrap();
        assert!(ents.iter().any(|e| e.name == "Darth Vader" && e.category == EntityCategory::Person));
        assert!(!ents.iter().any(|e| e.category == EntityCategory::Object && e.name == "Vader"));
    }

    #[test]
    fn recurring_bigram_claims_its_tokens() {
        let sents = sentences(&[
            "The Millennium Falcon flees.",
            "The Millennium Falcon lands.",
            "A falcon screams.",
        ]);
        let ents = extract_entities(&sents, &NullTagger, &reference(), 10, &mut Diagnostics::new()).unwrap();
        let falcon_bigram = ents.iter().find(|e| e.name == "Millennium Falcon").unwrap();
        assert!((falcon_bigram.salience - 2.0 * 4f64.ln()).abs() < 1e-12);
        // Only the standalone occurrence is left for the unigram.
        let falcon = ents.iter().find(|e| e.name == "falcon").unwrap();
        assert!((falcon.salience - 4f64.ln()).abs() < 1e-12);
        assert!(!ents.iter().any(|e| e.name == "Millennium"));
    }

    #[test]
    fn case_insensitive_dedup_keeps_first_surface() {
        let tagger = GazetteerTagger::new([("Hoth", TagLabel::Location), ("HOTH", TagLabel::Location)]);
        let sents = sentences(&["Hoth is cold.", "HOTH falls."]);
        let ents = extract_entities(&sents, &tagger, &reference(), 10, &mut Diagnostics::new()).unwrap();
        let hoth: Vec<_> = ents.iter().filter(|e| e.category == EntityCategory::Location).collect();
        assert_eq!(hoth.len(), 1);
        assert_eq!(hoth[0].name, "Hoth");
    }

    #[test]
    fn rejects_small_reference_corpus_and_empty_input() {
        let one = ReferenceCorpus::from_texts(&["only one"]);
        let sents = sentences(&["Luke trains."]);
        assert!(matches!(
            extract_entities(&sents, &NullTagger, &one, 10, &mut Diagnostics::new()),
            Err(KbError::InvalidInput(_))
        ));
        assert!(matches!(
            extract_entities(&[], &NullTagger, &reference(), 10, &mut Diagnostics::new()),
            Err(KbError::InvalidInput(_))
        ));
    }
}
