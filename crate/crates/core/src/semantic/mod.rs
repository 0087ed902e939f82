//! Embeddings, cosine ranking, the product embedding and word-level concept
//! extraction.

pub mod provider;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use provider::{
    CachingEmbedder, EmbeddingError, EmbeddingMode, EmbeddingProvider, FixtureEmbedder, HttpEmbedder,
    HttpEmbedderConfig,
};

use crate::text::content_tokens;

#[derive(Debug, Error)]
pub enum SemanticError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no content word in '{0}'")]
    NoCandidateWord(String),
    #[error(transparent)]
    Provider(#[from] EmbeddingError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub mode: EmbeddingMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductEmbedding {
    pub term: String,
    pub selected_related: Vec<String>,
    pub vector: EmbeddingVector,
}

/// A candidate's position in the input list, its id and its cosine score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub position: usize,
    pub candidate_id: String,
    pub score: f64,
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

/// Embeds a batch and checks the provider honored its contract.
pub fn embed_many(
    provider: &dyn EmbeddingProvider,
    texts: &[&str],
    mode: EmbeddingMode,
) -> Result<Vec<EmbeddingVector>, SemanticError> {
    if let Some(t) = texts.iter().find(|t| t.trim().is_empty()) {
        return Err(SemanticError::InvalidInput(format!("cannot embed empty text '{t}'")));
    }
    let vectors = provider.embed_batch(texts, mode)?;
    if vectors.len() != texts.len() {
        return Err(EmbeddingError::Provider(format!("expected {} vectors, got {}", texts.len(), vectors.len())).into());
    }
    let dim = provider.dimension();
    vectors
        .into_iter()
        .map(|values| {
            if values.len() != dim {
                return Err(EmbeddingError::Provider(format!("vector has dimension {}, expected {dim}", values.len())).into());
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(EmbeddingError::Provider("non-finite vector entry".into()).into());
            }
            Ok(EmbeddingVector { values, mode })
        })
        .collect()
}

pub fn embed(provider: &dyn EmbeddingProvider, text: &str, mode: EmbeddingMode) -> Result<EmbeddingVector, SemanticError> {
    Ok(embed_many(provider, &[text], mode)?.remove(0))
}

/// Unit-normalized mean of the term vector and each selected related word's
/// vector, all embedded in query mode.
pub fn build_product_embedding(
    provider: &dyn EmbeddingProvider,
    term: &str,
    selected_related: &[String],
) -> Result<ProductEmbedding, SemanticError> {
    let term = term.trim();
    if term.is_empty() {
        return Err(SemanticError::InvalidInput("product term is empty".into()));
    }
    let mut texts: Vec<&str> = vec![term];
    texts.extend(selected_related.iter().map(|s| s.trim()).filter(|s| !s.is_empty()));
    let vectors = embed_many(provider, &texts, EmbeddingMode::Query)?;
    let dim = provider.dimension();
    let mut mean = vec![0.0; dim];
    for v in &vectors {
        for (m, x) in mean.iter_mut().zip(&v.values) {
            *m += x;
        }
    }
    let n = vectors.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    let norm = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(SemanticError::InvalidInput("product embedding is the zero vector".into()));
    }
    mean.iter_mut().for_each(|m| *m /= norm);
    Ok(ProductEmbedding {
        term: term.to_string(),
        selected_related: selected_related.to_vec(),
        vector: EmbeddingVector {
            values: mean,
            mode: EmbeddingMode::Query,
        },
    })
}

/// Orders scores descending, earlier position first on ties.
pub(crate) fn by_score_then_position(a: (f64, usize), b: (f64, usize)) -> Ordering {
    b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1))
}

/// Top-`k` of pre-embedded candidates by cosine to `query`.
pub fn rank_vectors(query: &[f64], candidates: &[(String, Vec<f64>)], k: usize) -> Vec<ScoredCandidate> {
    let mut scored: Vec<ScoredCandidate> = candidates
        .iter()
        .enumerate()
        .map(|(position, (id, v))| ScoredCandidate {
            position,
            candidate_id: id.clone(),
            score: cosine(query, v),
        })
        .collect();
    scored.sort_by(|a, b| by_score_then_position((a.score, a.position), (b.score, b.position)));
    scored.truncate(k);
    scored
}

/// Embeds `(id, passage)` candidates in passage mode and returns the top `k`
/// by cosine to `query`; ties keep input order.
pub fn rank_by_similarity(
    provider: &dyn EmbeddingProvider,
    query: &EmbeddingVector,
    candidates: &[(String, String)],
    k: usize,
) -> Result<Vec<ScoredCandidate>, SemanticError> {
    if k == 0 {
        return Err(SemanticError::InvalidInput("k must be at least 1".into()));
    }
    if candidates.is_empty() {
        return Err(SemanticError::InvalidInput("no candidates to rank".into()));
    }
    let texts: Vec<&str> = candidates.iter().map(|(_, t)| t.as_str()).collect();
    let vectors = embed_many(provider, &texts, EmbeddingMode::Passage)?;
    let embedded: Vec<(String, Vec<f64>)> = candidates
        .iter()
        .zip(vectors)
        .map(|((id, _), v)| (id.clone(), v.values))
        .collect();
    Ok(rank_vectors(&query.values, &embedded, k))
}

/// The content word of `sentence` closest to the product embedding.
///
/// Content words are alphabetic tokens outside the stopword list; they are
/// compared case-folded but returned as written. Ties go to the earliest
/// token.
pub fn most_related_word(
    provider: &dyn EmbeddingProvider,
    product: &ProductEmbedding,
    sentence: &str,
) -> Result<(String, f64), SemanticError> {
    let tokens = content_tokens(sentence);
    if tokens.is_empty() {
        return Err(SemanticError::NoCandidateWord(sentence.to_string()));
    }
    let folded: Vec<String> = tokens.iter().map(|t| t.folded()).collect();
    let texts: Vec<&str> = folded.iter().map(String::as_str).collect();
    let vectors = embed_many(provider, &texts, EmbeddingMode::Passage)?;
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in vectors.iter().enumerate() {
        let score = cosine(&product.vector.values, &v.values);
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((i, score));
        }
    }
    let (i, score) = best.expect("non-empty token list");
    Ok((tokens[i].text.to_string(), score))
}
