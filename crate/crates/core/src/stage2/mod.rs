//! Expands each connecting concept into a blend suggestion: plot scenes on
//! the pop-culture side, LLM-suggested scenes on the product side, and
//! reference images for both.

pub mod images;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{Diagnostics, WarningKind};
use crate::kb::KnowledgeBase;
use crate::llm::{parse_enumerated_list, Gateway};
use crate::semantic::{
    by_score_then_position, cosine, embed, embed_many, rank_by_similarity, EmbeddingMode, EmbeddingProvider,
    ProductEmbedding,
};
use crate::stage1::{record_gateway_error, ConnectingConcept, Provenance, StageError, Strategy, StrategyBundle};
use crate::text::{content_tokens, fold_key};

pub use images::{fetch_images, BingImageSearch, FixtureImageSearch, ImageRef, ImageSearch, ImageSearchError, IMAGES_PER_SCENE};

pub const POP_SCENES: usize = 2;
pub const PRODUCT_SCENES: usize = 2;
pub const GENERAL_PRODUCT_SCENES: usize = 5;
pub const CONCEPT_PRODUCT_SCENES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneSide {
    Pop,
    Product,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SceneOrigin {
    PlotSentence { index: usize },
    /// Answer to the generic "scenes for this product" prompt.
    ProductScenes,
    /// Answer to the "product scenes for this concept" prompt.
    ConceptScenes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSuggestion {
    pub side: SceneSide,
    pub text: String,
    pub origin: SceneOrigin,
    pub score: Option<f64>,
    pub images: Vec<ImageRef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlendFlag {
    /// The product scene pool was empty; only pop scenes are shown.
    NoProductScenes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlendSuggestion {
    pub concept: ConnectingConcept,
    pub pop_scenes: Vec<SceneSuggestion>,
    pub product_scenes: Vec<SceneSuggestion>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub flags: Vec<BlendFlag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneOptions {
    /// Weight of product similarity against concept similarity when picking
    /// product scenes.
    pub product_weight: f64,
    /// When set, pool scenes with fewer content words are discarded.
    pub min_scene_content_words: Option<usize>,
}

impl Default for SceneOptions {
    fn default() -> Self {
        Self {
            product_weight: 0.5,
            min_scene_content_words: None,
        }
    }
}

/// A candidate product scene before selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolScene {
    pub text: String,
    pub origin: SceneOrigin,
}

/// Plot sentences illustrating a concept. A `no_gpt` concept gets exactly
/// its source sentence; any other concept gets the two sentences closest to
/// the concept text plus its first associated entity.
pub fn pop_scenes_for_concept(
    kb: &KnowledgeBase,
    concept: &ConnectingConcept,
    embedder: &dyn EmbeddingProvider,
) -> Result<Vec<SceneSuggestion>, StageError> {
    if let (Strategy::NoGpt, Provenance::PlotSentence { index, similarity }) = (concept.strategy, &concept.provenance) {
        let sentence = kb
            .sentences
            .iter()
            .find(|s| s.index == *index)
            .ok_or_else(|| StageError::EmptyResult(format!("sentence {index} is not in the knowledge base")))?;
        return Ok(vec![SceneSuggestion {
            side: SceneSide::Pop,
            text: sentence.resolved_text.clone(),
            origin: SceneOrigin::PlotSentence { index: *index },
            score: Some(*similarity),
            images: Vec::new(),
        }]);
    }
    if kb.sentences.is_empty() {
        return Err(StageError::EmptyResult("knowledge base has no sentences".into()));
    }
    let query = match concept.associated_entities.first() {
        Some(entity) => format!("{} {}", concept.text, entity),
        None => concept.text.clone(),
    };
    let query = embed(embedder, &query, EmbeddingMode::Query)?;
    let candidates: Vec<(String, String)> = kb
        .sentences
        .iter()
        .map(|s| (s.index.to_string(), s.resolved_text.clone()))
        .collect();
    let ranked = rank_by_similarity(embedder, &query, &candidates, POP_SCENES)?;
    Ok(ranked
        .into_iter()
        .map(|hit| {
            let s = &kb.sentences[hit.position];
            SceneSuggestion {
                side: SceneSide::Pop,
                text: s.resolved_text.clone(),
                origin: SceneOrigin::PlotSentence { index: s.index },
                score: Some(hit.score),
                images: Vec::new(),
            }
        })
        .collect())
}

/// Candidate product scenes: the generic product list followed by the
/// concept-specific list, de-duplicated case-insensitively.
pub fn product_scene_pool(
    product_term: &str,
    concept: &ConnectingConcept,
    gateway: &Gateway,
    options: &SceneOptions,
    diag: &mut Diagnostics,
) -> Result<Vec<PoolScene>, StageError> {
    let requests = [
        (gateway.product_scenes_request(product_term), GENERAL_PRODUCT_SCENES, SceneOrigin::ProductScenes),
        (
            gateway.concept_scenes_request(product_term, &concept.text),
            CONCEPT_PRODUCT_SCENES,
            SceneOrigin::ConceptScenes,
        ),
    ];
    let mut pool: Vec<PoolScene> = Vec::new();
    for (request, expected, origin) in requests {
        let context = format!("product scenes for {:?}", concept.text);
        let raw = match gateway.complete(&request) {
            Ok(r) => r.raw_text,
            Err(e) => {
                record_gateway_error(&e, diag, &context);
                continue;
            }
        };
        let parsed = match parse_enumerated_list(&raw, expected) {
            Ok(p) => p,
            Err(e) => {
                record_gateway_error(&e, diag, &context);
                continue;
            }
        };
        if parsed.is_short() {
            diag.warn(
                WarningKind::ListShortfall,
                format!("{context}: {} of {expected} items", parsed.items.len()),
            );
        }
        for text in parsed.items {
            if options
                .min_scene_content_words
                .is_some_and(|min| content_tokens(&text).len() < min)
            {
                continue;
            }
            if !pool.iter().any(|p| fold_key(&p.text) == fold_key(&text)) {
                pool.push(PoolScene { text, origin });
            }
        }
    }
    if pool.is_empty() {
        return Err(StageError::EmptyResult(format!(
            "no product scenes for {product_term:?} and {:?}",
            concept.text
        )));
    }
    Ok(pool)
}

/// Picks the two pool scenes with the highest
/// `w * cos(scene, product) + (1 - w) * cos(scene, concept)`; ties keep pool
/// order.
pub fn select_product_scenes(
    pool: &[PoolScene],
    product: &ProductEmbedding,
    concept: &ConnectingConcept,
    embedder: &dyn EmbeddingProvider,
    product_weight: f64,
) -> Result<Vec<SceneSuggestion>, StageError> {
    if pool.is_empty() {
        return Ok(Vec::new());
    }
    let concept_vec = embed(embedder, &concept.text, EmbeddingMode::Query)?;
    let texts: Vec<&str> = pool.iter().map(|p| p.text.as_str()).collect();
    let vectors = embed_many(embedder, &texts, EmbeddingMode::Passage)?;
    let mut scored: Vec<(f64, usize)> = vectors
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let s = product_weight * cosine(&v.values, &product.vector.values)
                + (1.0 - product_weight) * cosine(&v.values, &concept_vec.values);
            (s, i)
        })
        .collect();
    scored.sort_by(|a, b| by_score_then_position(*a, *b));
    Ok(scored
        .into_iter()
        .take(PRODUCT_SCENES)
        .map(|(score, i)| SceneSuggestion {
            side: SceneSide::Product,
            text: pool[i].text.clone(),
            origin: pool[i].origin,
            score: Some(score),
            images: Vec::new(),
        })
        .collect())
}

#[allow(clippy::too_many_arguments)]
fn blend_for_concept(
    kb: &KnowledgeBase,
    concept: &ConnectingConcept,
    product: &ProductEmbedding,
    embedder: &dyn EmbeddingProvider,
    gateway: &Gateway,
    images: &dyn ImageSearch,
    options: &SceneOptions,
    diag: &mut Diagnostics,
) -> Result<BlendSuggestion, StageError> {
    let mut pop_scenes = pop_scenes_for_concept(kb, concept, embedder)?;
    let mut flags = Vec::new();
    let mut product_scenes = match product_scene_pool(&product.term, concept, gateway, options, diag) {
        Ok(pool) => select_product_scenes(&pool, product, concept, embedder, options.product_weight)?,
        Err(StageError::EmptyResult(msg)) => {
            diag.warn(WarningKind::EmptyProductPool, msg);
            flags.push(BlendFlag::NoProductScenes);
            Vec::new()
        }
        Err(e) => return Err(e),
    };
    for scene in pop_scenes.iter_mut().chain(product_scenes.iter_mut()) {
        scene.images = fetch_images(&scene.text, images, diag);
    }
    Ok(BlendSuggestion {
        concept: concept.clone(),
        pop_scenes,
        product_scenes,
        flags,
    })
}

/// Builds one suggestion per concept, in strategy order. Concepts run in
/// parallel; their warnings are merged back in concept order so output is
/// deterministic.
#[allow(clippy::too_many_arguments)]
pub fn assemble_blends(
    kb: &KnowledgeBase,
    bundle: &StrategyBundle,
    product: &ProductEmbedding,
    embedder: &dyn EmbeddingProvider,
    gateway: &Gateway,
    images: &dyn ImageSearch,
    options: &SceneOptions,
    diag: &mut Diagnostics,
) -> Result<Vec<BlendSuggestion>, StageError> {
    let concepts: Vec<&ConnectingConcept> = bundle.concepts().collect();
    if concepts.is_empty() {
        return Err(StageError::EmptyResult("no connecting concepts to expand".into()));
    }
    let results: Vec<(Result<BlendSuggestion, StageError>, Diagnostics)> = concepts
        .par_iter()
        .map(|concept| {
            let mut d = Diagnostics::new();
            let r = blend_for_concept(kb, concept, product, embedder, gateway, images, options, &mut d);
            (r, d)
        })
        .collect();

    let mut blends = Vec::new();
    for (concept, (result, d)) in concepts.iter().zip(results) {
        diag.merge(d);
        match result {
            Ok(b) => blends.push(b),
            Err(StageError::Semantic(e)) if !matches!(e, crate::semantic::SemanticError::Provider(_)) => {
                diag.warn(WarningKind::ConceptSkipped, format!("{:?}: {e}", concept.text));
            }
            Err(StageError::EmptyResult(msg)) => {
                diag.warn(WarningKind::ConceptSkipped, format!("{:?}: {msg}", concept.text));
            }
            Err(e) => return Err(e),
        }
    }
    if blends.is_empty() {
        return Err(StageError::EmptyResult("every concept was skipped".into()));
    }
    Ok(blends)
}
