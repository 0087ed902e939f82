#![allow(dead_code)]

use std::path::PathBuf;

use blendkit_core::kb::{
    AttributeType, DomainConfig, Entity, EntityAttribute, EntityCategory, KnowledgeBase, PlotSentence, KB_SCHEMA_VERSION,
};
use blendkit_core::llm::{Gateway, PromptRequest, ResponseStore};
use blendkit_core::semantic::{EmbeddingMode, EmbeddingProvider};

pub fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Plain textbook cosine, kept separate from the crate's implementation.
pub fn oracle_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

pub fn raw_embed(p: &dyn EmbeddingProvider, text: &str, mode: EmbeddingMode) -> Vec<f64> {
    p.embed_batch(&[text], mode).unwrap().remove(0)
}

/// Stable selection sort: highest score first, earliest index on ties.
pub fn oracle_top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..scores.len()).collect();
    let mut out = Vec::new();
    while out.len() < k && !remaining.is_empty() {
        let mut best = 0;
        for j in 1..remaining.len() {
            if scores[remaining[j]] > scores[remaining[best]] {
                best = j;
            }
        }
        out.push(remaining.remove(best));
    }
    out
}

pub fn sentence(index: usize, text: &str) -> PlotSentence {
    PlotSentence {
        index,
        raw_text: text.to_string(),
        resolved_text: text.to_string(),
    }
}

pub fn entity(name: &str, category: EntityCategory, salience: f64, rank: usize) -> Entity {
    Entity {
        name: name.to_string(),
        category,
        salience,
        rank,
        first_sentence: 0,
    }
}

pub fn attribute(entity: &str, category: EntityCategory, ty: AttributeType, text: &str) -> EntityAttribute {
    EntityAttribute {
        entity: entity.to_string(),
        category,
        attribute_type: ty,
        text: text.to_string(),
        source_prompt_key: "test".to_string(),
    }
}

pub fn kb(sentences: &[&str], entities: Vec<Entity>, attributes: Vec<EntityAttribute>) -> KnowledgeBase {
    KnowledgeBase {
        schema_version: KB_SCHEMA_VERSION,
        domain: DomainConfig {
            domain_id: "test".into(),
            display_name: "Test Domain".into(),
            plot_source: vec![PathBuf::from("plot.txt")],
            reference_corpus: PathBuf::from("corpus"),
        },
        sentences: sentences.iter().enumerate().map(|(i, s)| sentence(i, s)).collect(),
        entities,
        attributes,
    }
}

/// Offline gateway whose cache is pre-filled with the given responses.
pub fn seeded_gateway(dir: &std::path::Path, responses: &[(PromptRequest, &str)]) -> Gateway {
    let store = ResponseStore::open(dir).unwrap();
    for (req, text) in responses {
        store.put(req, text).unwrap();
    }
    Gateway::new(store).offline(true)
}

/// Unit vector along one axis.
pub fn axis(dim: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[i] = 1.0;
    v
}
