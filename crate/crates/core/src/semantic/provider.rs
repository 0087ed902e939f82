//! Embedding providers: a deterministic fixture table for offline runs, an
//! HTTP adapter for hosted asymmetric retrieval models, and a memoizing
//! wrapper.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::text::{alpha_tokens, fold_key, is_stopword};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingMode {
    Query,
    Passage,
}

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("invalid embedding input: {0}")]
    InvalidInput(String),
    #[error("embedding provider failed: {0}")]
    Provider(String),
}

/// Contract every embedding backend implements.
///
/// Implementations must return exactly one vector of `dimension()` finite
/// values per input text, and must be deterministic for a fixed model.
pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed_batch(&self, texts: &[&str], mode: EmbeddingMode) -> Result<Vec<Vec<f64>>, EmbeddingError>;
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Arc<P> {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn embed_batch(&self, texts: &[&str], mode: EmbeddingMode) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        (**self).embed_batch(texts, mode)
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Pseudo-random unit vector derived from SHA-256 of the word.
pub fn hashed_vector(word: &str, dimension: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(dimension);
    let mut block = 0u32;
    while out.len() < dimension {
        let mut hasher = Sha256::new();
        hasher.update(word.as_bytes());
        hasher.update(block.to_le_bytes());
        let digest = hasher.finalize();
        for chunk in digest.chunks_exact(4) {
            if out.len() == dimension {
                break;
            }
            let u = u32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
            out.push(u as f64 / u32::MAX as f64 * 2.0 - 1.0);
        }
        block += 1;
    }
    normalize(&mut out);
    out
}

/// Deterministic offline embedder.
///
/// A text whose case-folded form is in the override table gets that vector
/// verbatim. Otherwise its vector is the normalized sum of its content-word
/// vectors (all words if every word is a stopword), where each word uses its
/// override if present and a hash-seeded unit vector if not. Query and
/// passage modes embed identically.
#[derive(Debug, Clone)]
pub struct FixtureEmbedder {
    dimension: usize,
    overrides: HashMap<String, Vec<f64>>,
}

impl FixtureEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self {
            dimension,
            overrides: HashMap::new(),
        }
    }

    pub fn with_override(mut self, text: &str, vector: Vec<f64>) -> Self {
        self.set_override(text, vector);
        self
    }

    pub fn set_override(&mut self, text: &str, vector: Vec<f64>) {
        assert_eq!(vector.len(), self.dimension, "override for '{text}' has wrong dimension");
        self.overrides.insert(fold_key(text), vector);
    }

    /// Reads an override table: one row per entry, `text<TAB>v1 v2 ... vd`.
    /// Values may be separated by spaces or commas; `#` lines are comments.
    /// All rows must share one dimension, which becomes the embedder's.
    pub fn from_table_file(path: &Path) -> Result<Self, EmbeddingError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EmbeddingError::InvalidInput(format!("{}: {e}", path.display())))?;
        Self::from_table(&text)
    }

    pub fn from_table(text: &str) -> Result<Self, EmbeddingError> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (word, values) = line
                .split_once('\t')
                .ok_or_else(|| EmbeddingError::InvalidInput(format!("line {}: expected text<TAB>values", lineno + 1)))?;
            let values = values
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| EmbeddingError::InvalidInput(format!("line {}: {e}", lineno + 1)))?;
            if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                return Err(EmbeddingError::InvalidInput(format!("line {}: bad vector", lineno + 1)));
            }
            rows.push((word.trim().to_string(), values));
        }
        let dimension = rows
            .first()
            .map(|(_, v)| v.len())
            .ok_or_else(|| EmbeddingError::InvalidInput("empty embedding table".into()))?;
        let mut out = Self::new(dimension);
        for (word, v) in rows {
            if v.len() != dimension {
                return Err(EmbeddingError::InvalidInput(format!(
                    "'{word}' has dimension {}, expected {dimension}",
                    v.len()
                )));
            }
            out.set_override(&word, v);
        }
        Ok(out)
    }

    fn word_vector(&self, folded: &str) -> Vec<f64> {
        match self.overrides.get(folded) {
            Some(v) => {
                let mut v = v.clone();
                normalize(&mut v);
                v
            }
            None => hashed_vector(folded, self.dimension),
        }
    }

    fn embed_one(&self, text: &str) -> Vec<f64> {
        let key = fold_key(text);
        if let Some(v) = self.overrides.get(&key) {
            return v.clone();
        }
        let tokens = alpha_tokens(text);
        let mut words: Vec<String> = tokens.iter().filter(|t| !is_stopword(t.text)).map(|t| t.folded()).collect();
        if words.is_empty() {
            words = tokens.iter().map(|t| t.folded()).collect();
        }
        if words.is_empty() {
            return hashed_vector(&key, self.dimension);
        }
        let mut sum = vec![0.0; self.dimension];
        for w in &words {
            for (s, x) in sum.iter_mut().zip(self.word_vector(w)) {
                *s += x;
            }
        }
        normalize(&mut sum);
        sum
    }
}

impl EmbeddingProvider for FixtureEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(&self, texts: &[&str], _mode: EmbeddingMode) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

/// Settings for an OpenAI-compatible `/embeddings` endpoint serving an
/// asymmetric retrieval model (E5-style `query: ` / `passage: ` prefixes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpEmbedderConfig {
    pub endpoint: String,
    pub model: String,
    pub dimension: usize,
    #[serde(default = "default_query_prefix")]
    pub query_prefix: String,
    #[serde(default = "default_passage_prefix")]
    pub passage_prefix: String,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_query_prefix() -> String {
    "query: ".into()
}
fn default_passage_prefix() -> String {
    "passage: ".into()
}
fn default_timeout_secs() -> u64 {
    30
}

pub struct HttpEmbedder {
    config: HttpEmbedderConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: Vec<String>,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    index: usize,
    embedding: Vec<f64>,
}

impl HttpEmbedder {
    pub fn new(config: HttpEmbedderConfig, api_key: Option<String>) -> Result<Self, EmbeddingError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| EmbeddingError::Provider(e.to_string()))?;
        Ok(Self { config, api_key, client })
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn dimension(&self) -> usize {
        self.config.dimension
    }

    fn embed_batch(&self, texts: &[&str], mode: EmbeddingMode) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let prefix = match mode {
            EmbeddingMode::Query => &self.config.query_prefix,
            EmbeddingMode::Passage => &self.config.passage_prefix,
        };
        let body = EmbeddingRequest {
            model: &self.config.model,
            input: texts.iter().map(|t| format!("{prefix}{t}")).collect(),
        };
        let mut req = self.client.post(&self.config.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| EmbeddingError::Provider(e.to_string()))?;
        let mut parsed: EmbeddingResponse = resp.json().map_err(|e| EmbeddingError::Provider(e.to_string()))?;
        parsed.data.sort_by_key(|d| d.index);
        if parsed.data.len() != texts.len() {
            return Err(EmbeddingError::Provider(format!(
                "expected {} embeddings, got {}",
                texts.len(),
                parsed.data.len()
            )));
        }
        Ok(parsed.data.into_iter().map(|d| d.embedding).collect())
    }
}

/// Memoizes another provider's vectors by (mode, text).
pub struct CachingEmbedder {
    inner: Arc<dyn EmbeddingProvider>,
    memo: Mutex<HashMap<(EmbeddingMode, String), Vec<f64>>>,
}

impl CachingEmbedder {
    pub fn new(inner: Arc<dyn EmbeddingProvider>) -> Self {
        Self {
            inner,
            memo: Mutex::new(HashMap::new()),
        }
    }
}

impl EmbeddingProvider for CachingEmbedder {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn embed_batch(&self, texts: &[&str], mode: EmbeddingMode) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        let missing: Vec<&str> = {
            let memo = self.memo.lock().expect("embedding memo poisoned");
            let mut seen = std::collections::HashSet::new();
            texts
                .iter()
                .copied()
                .filter(|t| !memo.contains_key(&(mode, t.to_string())) && seen.insert(*t))
                .collect()
        };
        if !missing.is_empty() {
            let vectors = self.inner.embed_batch(&missing, mode)?;
            let mut memo = self.memo.lock().expect("embedding memo poisoned");
            for (t, v) in missing.iter().zip(vectors) {
                memo.insert((mode, t.to_string()), v);
            }
        }
        let memo = self.memo.lock().expect("embedding memo poisoned");
        Ok(texts.iter().map(|t| memo[&(mode, t.to_string())].clone()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashed_vectors_are_unit_and_deterministic() {
        let a = hashed_vector("swim", 64);
        assert_eq!(a, hashed_vector("swim", 64));
        assert_ne!(a, hashed_vector("pool", 64));
        let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn table_file_sets_dimension_and_rejects_ragged_rows() {
        let e = FixtureEmbedder::from_table("# demo\nswim\t1 0\npool\t0.9,0.1\n").unwrap();
        assert_eq!(e.dimension(), 2);
        assert_eq!(e.embed_batch(&["pool"], EmbeddingMode::Passage).unwrap()[0], vec![0.9, 0.1]);
        assert!(FixtureEmbedder::from_table("a\t1 0\nb\t1 0 0\n").is_err());
        assert!(FixtureEmbedder::from_table("").is_err());
    }

    #[test]
    fn sentence_vector_is_sum_of_content_words() {
        let e = FixtureEmbedder::new(2)
            .with_override("swim", vec![1.0, 0.0])
            .with_override("pool", vec![0.0, 2.0]);
        let v = &e.embed_batch(&["The swim in the pool"], EmbeddingMode::Passage).unwrap()[0];
        let s = 0.5f64.sqrt();
        assert!((v[0] - s).abs() < 1e-12 && (v[1] - s).abs() < 1e-12);
    }

    #[test]
    fn caching_embedder_matches_inner() {
        let inner: Arc<dyn EmbeddingProvider> = Arc::new(FixtureEmbedder::new(8));
        let cached = CachingEmbedder::new(inner.clone());
        let texts = ["a droid", "a droid", "the pool"];
        assert_eq!(
            cached.embed_batch(&texts, EmbeddingMode::Query).unwrap(),
            inner.embed_batch(&texts, EmbeddingMode::Query).unwrap()
        );
        assert_eq!(
            cached.embed_batch(&texts, EmbeddingMode::Query).unwrap(),
            inner.embed_batch(&texts, EmbeddingMode::Query).unwrap()
        );
    }
}
