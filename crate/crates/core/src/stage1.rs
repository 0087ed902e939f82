//! Connecting concepts between a pop-culture domain and a product.
//!
//! * `no_gpt`: rank plot sentences against the product embedding and take
//!   the most product-like word from each of the top five.
//! * `half_gpt`: rank the knowledge base's LLM-derived entity attributes
//!   against the product embedding.
//! * `full_gpt`: ask the LLM directly, once per entity kind, and keep the
//!   justification clause as the concept.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{Diagnostics, WarningKind};
use crate::kb::{AttributeType, KnowledgeBase};
use crate::llm::{parse_direct_association, EntityKind, Gateway, GatewayError};
use crate::semantic::{
    by_score_then_position, cosine, embed_many, most_related_word, rank_by_similarity, EmbeddingMode,
    EmbeddingProvider, ProductEmbedding, SemanticError,
};
use crate::text::fold_key;

pub const CONCEPTS_PER_STRATEGY: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    NoGpt,
    HalfGpt,
    FullGpt,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::NoGpt, Strategy::HalfGpt, Strategy::FullGpt];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::NoGpt => "no_gpt",
            Strategy::HalfGpt => "half_gpt",
            Strategy::FullGpt => "full_gpt",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "no_gpt" => Some(Strategy::NoGpt),
            "half_gpt" => Some(Strategy::HalfGpt),
            "full_gpt" => Some(Strategy::FullGpt),
            _ => None,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    /// `similarity` is the sentence's cosine to the product embedding.
    PlotSentence { index: usize, similarity: f64 },
    EntityAttribute { entity: String, attribute_type: AttributeType },
    LlmRationale { entity_kind: EntityKind },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectingConcept {
    pub text: String,
    pub strategy: Strategy,
    pub score: Option<f64>,
    pub provenance: Provenance,
    pub associated_entities: Vec<String>,
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error("no result: {0}")]
    EmptyResult(String),
    #[error(transparent)]
    Semantic(#[from] SemanticError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// One strategy's concepts, or the reason it produced none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyOutcome {
    pub concepts: Vec<ConnectingConcept>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

/// Per-strategy results; a strategy that was not requested is `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StrategyBundle {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub no_gpt: Option<StrategyOutcome>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub half_gpt: Option<StrategyOutcome>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub full_gpt: Option<StrategyOutcome>,
}

impl StrategyBundle {
    pub fn get(&self, strategy: Strategy) -> Option<&StrategyOutcome> {
        match strategy {
            Strategy::NoGpt => self.no_gpt.as_ref(),
            Strategy::HalfGpt => self.half_gpt.as_ref(),
            Strategy::FullGpt => self.full_gpt.as_ref(),
        }
    }

    /// All concepts in strategy order.
    pub fn concepts(&self) -> impl Iterator<Item = &ConnectingConcept> {
        Strategy::ALL
            .into_iter()
            .filter_map(|s| self.get(s))
            .flat_map(|o| o.concepts.iter())
    }

    pub fn len(&self) -> usize {
        self.concepts().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptOptions {
    pub strategies: BTreeSet<Strategy>,
    /// Drop scored concepts below this similarity.
    pub cutoff: Option<f64>,
    /// Drop concept `i` when its score is below `ratio * score[i - 1]`.
    pub drop_ratio: Option<f64>,
}

impl Default for ConceptOptions {
    fn default() -> Self {
        Self {
            strategies: Strategy::ALL.into_iter().collect(),
            cutoff: None,
            drop_ratio: None,
        }
    }
}

pub fn no_gpt_concepts(
    kb: &KnowledgeBase,
    product: &ProductEmbedding,
    embedder: &dyn EmbeddingProvider,
) -> Result<Vec<ConnectingConcept>, StageError> {
    if kb.sentences.is_empty() {
        return Err(StageError::EmptyResult("knowledge base has no sentences".into()));
    }
    let candidates: Vec<(String, String)> = kb
        .sentences
        .iter()
        .map(|s| (s.index.to_string(), s.resolved_text.clone()))
        .collect();
    let ranked = rank_by_similarity(embedder, &product.vector, &candidates, CONCEPTS_PER_STRATEGY)?;

    let mut out: Vec<ConnectingConcept> = Vec::new();
    for hit in ranked {
        let sentence = &kb.sentences[hit.position];
        let (word, score) = match most_related_word(embedder, product, &sentence.resolved_text) {
            Ok(found) => found,
            Err(SemanticError::NoCandidateWord(_)) => continue,
            Err(e) => return Err(e.into()),
        };
        let concept = ConnectingConcept {
            text: word,
            strategy: Strategy::NoGpt,
            score: Some(score),
            provenance: Provenance::PlotSentence {
                index: sentence.index,
                similarity: hit.score,
            },
            associated_entities: Vec::new(),
        };
        let key = fold_key(&concept.text);
        match out.iter().position(|c| fold_key(&c.text) == key) {
            Some(i) if out[i].score < concept.score => {
                out.remove(i);
                out.push(concept);
            }
            Some(_) => {}
            None => out.push(concept),
        }
    }
    if out.is_empty() {
        return Err(StageError::EmptyResult("no top-ranked sentence has a content word".into()));
    }
    Ok(out)
}

pub fn half_gpt_concepts(
    kb: &KnowledgeBase,
    product: &ProductEmbedding,
    embedder: &dyn EmbeddingProvider,
) -> Result<Vec<ConnectingConcept>, StageError> {
    if kb.attributes.is_empty() {
        return Err(StageError::EmptyResult("knowledge base has no entity attributes".into()));
    }
    let mut distinct: Vec<&str> = Vec::new();
    let mut slot: HashMap<&str, usize> = HashMap::new();
    for a in &kb.attributes {
        slot.entry(a.text.as_str()).or_insert_with(|| {
            distinct.push(a.text.as_str());
            distinct.len() - 1
        });
    }
    let vectors = embed_many(embedder, &distinct, EmbeddingMode::Passage)?;
    let mut ranked: Vec<(f64, usize)> = kb
        .attributes
        .iter()
        .enumerate()
        .map(|(i, a)| (cosine(&product.vector.values, &vectors[slot[a.text.as_str()]].values), i))
        .collect();
    ranked.sort_by(|a, b| by_score_then_position(*a, *b));

    let entity_order: HashMap<&str, usize> = kb.entities.iter().enumerate().map(|(i, e)| (e.name.as_str(), i)).collect();
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (score, i) in ranked {
        let key = fold_key(&kb.attributes[i].text);
        if !seen.insert(key.clone()) {
            continue;
        }
        let mut sharing: Vec<_> = kb.attributes.iter().filter(|a| fold_key(&a.text) == key).collect();
        sharing.sort_by(|a, b| {
            let ea = &kb.entities[entity_order[a.entity.as_str()]];
            let eb = &kb.entities[entity_order[b.entity.as_str()]];
            by_score_then_position((ea.salience, entity_order[a.entity.as_str()]), (eb.salience, entity_order[b.entity.as_str()]))
        });
        let mut entities: Vec<String> = Vec::new();
        for a in &sharing {
            if !entities.contains(&a.entity) {
                entities.push(a.entity.clone());
            }
        }
        entities.truncate(2);
        let top = sharing[0];
        out.push(ConnectingConcept {
            text: kb.attributes[i].text.clone(),
            strategy: Strategy::HalfGpt,
            score: Some(score),
            provenance: Provenance::EntityAttribute {
                entity: top.entity.clone(),
                attribute_type: top.attribute_type,
            },
            associated_entities: entities,
        });
        if out.len() == CONCEPTS_PER_STRATEGY {
            break;
        }
    }
    Ok(out)
}

/// Asks for one association per entity kind. Unparseable answers are
/// dropped with a warning; fixture misses are recorded in `diag`.
pub fn full_gpt_concepts(
    domain_display_name: &str,
    product_term: &str,
    gateway: &Gateway,
    diag: &mut Diagnostics,
) -> Result<Vec<ConnectingConcept>, StageError> {
    let mut out = Vec::new();
    let mut failures = Vec::new();
    for kind in EntityKind::ALL {
        let request = gateway.direct_association_request(kind, domain_display_name, product_term);
        let response = match gateway.complete(&request) {
            Ok(r) => r,
            Err(e) => {
                record_gateway_error(&e, diag, &format!("full_gpt {kind}"));
                failures.push(e.to_string());
                continue;
            }
        };
        match parse_direct_association(&response.raw_text, product_term, kind) {
            Ok(assoc) => out.push(ConnectingConcept {
                text: assoc.reason,
                strategy: Strategy::FullGpt,
                score: None,
                provenance: Provenance::LlmRationale { entity_kind: kind },
                associated_entities: vec![assoc.entity],
            }),
            Err(e) => {
                record_gateway_error(&e, diag, &format!("full_gpt {kind}"));
                failures.push(response.raw_text);
            }
        }
    }
    if out.is_empty() {
        return Err(StageError::EmptyResult(format!(
            "no direct association could be parsed: {}",
            failures.join(" | ")
        )));
    }
    Ok(out)
}

pub(crate) fn record_gateway_error(e: &GatewayError, diag: &mut Diagnostics, context: &str) {
    match e {
        GatewayError::FixtureMiss { key, .. } => {
            diag.fixture_miss(key);
            diag.warn(WarningKind::FixtureMiss, format!("{context}: {e}"));
        }
        GatewayError::Parse(_) => diag.warn(WarningKind::ParseFailure, format!("{context}: {e}")),
        GatewayError::AmbiguousParse(_) => diag.warn(WarningKind::AmbiguousParse, format!("{context}: {e}")),
        _ => diag.warn(WarningKind::ProviderFailure, format!("{context}: {e}")),
    }
}

/// Applies the optional absolute cut-off and relative drop filter. Each
/// concept is compared with its predecessor in the unfiltered list; concepts
/// without a score are kept.
pub fn apply_score_filters(concepts: Vec<ConnectingConcept>, cutoff: Option<f64>, drop_ratio: Option<f64>) -> Vec<ConnectingConcept> {
    let scores: Vec<Option<f64>> = concepts.iter().map(|c| c.score).collect();
    concepts
        .into_iter()
        .enumerate()
        .filter(|(i, c)| {
            let Some(score) = c.score else { return true };
            if cutoff.is_some_and(|min| score < min) {
                return false;
            }
            match (drop_ratio, i.checked_sub(1).and_then(|p| scores[p])) {
                (Some(ratio), Some(prev)) => score >= ratio * prev,
                _ => true,
            }
        })
        .map(|(_, c)| c)
        .collect()
}

fn outcome(result: Result<Vec<ConnectingConcept>, StageError>, strategy: Strategy, diag: &mut Diagnostics) -> StrategyOutcome {
    match result {
        Ok(concepts) => StrategyOutcome { concepts, error: None },
        Err(e) => {
            diag.warn(WarningKind::EmptyStrategy, format!("{strategy}: {e}"));
            StrategyOutcome {
                concepts: Vec::new(),
                error: Some(e.to_string()),
            }
        }
    }
}

/// Runs every requested strategy. A strategy that fails is reported in its
/// own outcome; the bundle itself never fails.
pub fn find_connecting_concepts(
    kb: &KnowledgeBase,
    product: &ProductEmbedding,
    embedder: &dyn EmbeddingProvider,
    gateway: &Gateway,
    options: &ConceptOptions,
    diag: &mut Diagnostics,
) -> StrategyBundle {
    let wants = |s| options.strategies.contains(&s);
    let filter = |r: Result<Vec<ConnectingConcept>, StageError>| r.map(|c| apply_score_filters(c, options.cutoff, options.drop_ratio));

    let ((no_gpt, half_gpt), (full_gpt, full_diag)) = rayon::join(
        || {
            (
                wants(Strategy::NoGpt).then(|| filter(no_gpt_concepts(kb, product, embedder))),
                wants(Strategy::HalfGpt).then(|| filter(half_gpt_concepts(kb, product, embedder))),
            )
        },
        || {
            let mut d = Diagnostics::new();
            let r = wants(Strategy::FullGpt)
                .then(|| full_gpt_concepts(&kb.domain.display_name, &product.term, gateway, &mut d));
            (r, d)
        },
    );

    let no_gpt = no_gpt.map(|r| outcome(r, Strategy::NoGpt, diag));
    let half_gpt = half_gpt.map(|r| outcome(r, Strategy::HalfGpt, diag));
    diag.merge(full_diag);
    let full_gpt = full_gpt.map(|r| outcome(r, Strategy::FullGpt, diag));
    StrategyBundle { no_gpt, half_gpt, full_gpt }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn concept(score: f64) -> ConnectingConcept {
        ConnectingConcept {
            text: format!("c{score}"),
            strategy: Strategy::HalfGpt,
            score: Some(score),
            provenance: Provenance::EntityAttribute {
                entity: "e".into(),
                attribute_type: AttributeType::Adjective,
            },
            associated_entities: vec!["e".into()],
        }
    }

    fn scores(cs: &[ConnectingConcept]) -> Vec<f64> {
        cs.iter().map(|c| c.score.unwrap()).collect()
    }

    #[test]
    fn drop_filter_removes_sharp_fall() {
        let cs = vec![concept(0.8), concept(0.78), concept(0.3)];
        assert_eq!(scores(&apply_score_filters(cs, None, Some(0.5))), [0.8, 0.78]);
    }

    #[test]
    fn cutoff_removes_low_scores() {
        let cs = vec![concept(0.4), concept(0.25), concept(0.17)];
        assert_eq!(scores(&apply_score_filters(cs, Some(0.2), None)), [0.4, 0.25]);
    }

    #[test]
    fn filters_default_off() {
        let cs = vec![concept(0.9), concept(0.01)];
        assert_eq!(apply_score_filters(cs.clone(), None, None), cs);
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(Strategy::parse(s.as_str()), Some(s));
        }
        assert_eq!(Strategy::parse("Half-GPT"), Some(Strategy::HalfGpt));
        assert_eq!(Strategy::parse("gpt"), None);
    }
}
