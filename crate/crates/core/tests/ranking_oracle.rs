//! Ranking functions checked against a brute-force cosine oracle over
//! hand-set fixture vectors.

mod common;

use blendkit_core::kb::{AttributeType, EntityCategory};
use blendkit_core::semantic::{
    build_product_embedding, cosine, most_related_word, rank_by_similarity, EmbeddingMode, FixtureEmbedder,
};
use blendkit_core::stage1::{half_gpt_concepts, ConnectingConcept, Provenance, Strategy as ConceptStrategy};
use blendkit_core::stage2::{select_product_scenes, PoolScene, SceneOrigin};
use common::*;
use proptest::prelude::*;

const WORDS: [&str; 10] = [
    "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel", "india", "juliet",
];
const DIM: usize = 4;
const TOL: f64 = 1e-9;

fn vec_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, DIM).prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3))
}

fn embedder_with(words: &[&str], vectors: &[Vec<f64>], product: &[f64]) -> FixtureEmbedder {
    let mut e = FixtureEmbedder::new(DIM).with_override("product", product.to_vec());
    for (w, v) in words.iter().zip(vectors) {
        e.set_override(w, v.clone());
    }
    e
}

fn oracle_product(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

#[test]
fn hand_computed_cosine() {
    let e = FixtureEmbedder::new(2)
        .with_override("swim", vec![1.0, 0.0])
        .with_override("pool", vec![0.9, 0.1]);
    let a = raw_embed(&e, "swim", EmbeddingMode::Query);
    let b = raw_embed(&e, "pool", EmbeddingMode::Passage);
    assert!((cosine(&a, &b) - 0.9 / 0.82f64.sqrt()).abs() < TOL);
    assert!((cosine(&a, &b) - 0.994).abs() < 5e-4);
}

#[test]
fn product_embedding_is_normalized_mean() {
    let e = FixtureEmbedder::new(2)
        .with_override("pool", vec![1.0, 0.0])
        .with_override("water", vec![0.0, 1.0]);
    let p = build_product_embedding(&e, "pool", &["water".to_string()]).unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    assert!((p.vector.values[0] - h).abs() < TOL && (p.vector.values[1] - h).abs() < TOL);
    assert!((p.vector.values[0] - 0.707).abs() < 1e-3);
}

#[test]
fn ties_keep_input_order() {
    let e = FixtureEmbedder::new(2)
        .with_override("product", vec![1.0, 0.0])
        .with_override("alpha", vec![0.0, 1.0])
        .with_override("bravo", vec![1.0, 1.0])
        .with_override("charlie", vec![2.0, 2.0]);
    let p = build_product_embedding(&e, "product", &[]).unwrap();
    let cands: Vec<(String, String)> = ["alpha", "bravo", "charlie"].iter().map(|w| (w.to_string(), w.to_string())).collect();
    let ranked = rank_by_similarity(&e, &p.vector, &cands, 3).unwrap();
    let ids: Vec<&str> = ranked.iter().map(|r| r.candidate_id.as_str()).collect();
    assert_eq!(ids, ["bravo", "charlie", "alpha"]);
}

proptest! {
    #[test]
    fn rank_by_similarity_matches_oracle(
        vectors in prop::collection::vec(vec_strategy(), 1..=10),
        product in vec_strategy(),
        k in 1usize..=10,
    ) {
        let words = &WORDS[..vectors.len()];
        let e = embedder_with(words, &vectors, &product);
        let p = build_product_embedding(&e, "product", &[]).unwrap();
        let cands: Vec<(String, String)> = words.iter().map(|w| (w.to_string(), w.to_string())).collect();
        let ranked = rank_by_similarity(&e, &p.vector, &cands, k).unwrap();

        let q = oracle_product(&product);
        let scores: Vec<f64> = vectors.iter().map(|v| oracle_cosine(&q, v)).collect();
        let expected = oracle_top_k(&scores, k);
        prop_assert_eq!(ranked.len(), expected.len());
        for (got, &want) in ranked.iter().zip(&expected) {
            prop_assert!((got.score - scores[want]).abs() < TOL);
            // Order may only differ where the oracle scores tie.
            prop_assert!(got.position == want || (scores[got.position] - scores[want]).abs() < TOL);
        }
    }

    #[test]
    fn most_related_word_matches_oracle(
        vectors in prop::collection::vec(vec_strategy(), 1..=10),
        product in vec_strategy(),
    ) {
        let words = &WORDS[..vectors.len()];
        let e = embedder_with(words, &vectors, &product);
        let p = build_product_embedding(&e, "product", &[]).unwrap();
        let sentence = format!("The {}.", words.join(" and the "));
        let (word, score) = most_related_word(&e, &p, &sentence).unwrap();

        let q = oracle_product(&product);
        let scores: Vec<f64> = vectors.iter().map(|v| oracle_cosine(&q, v)).collect();
        let best = oracle_top_k(&scores, 1)[0];
        prop_assert!((score - scores[best]).abs() < TOL);
        prop_assert!(word == words[best] || (scores[WORDS.iter().position(|w| *w == word).unwrap()] - scores[best]).abs() < TOL);
    }

    #[test]
    fn select_product_scenes_matches_oracle(
        vectors in prop::collection::vec(vec_strategy(), 1..=8),
        product in vec_strategy(),
        concept_vec in vec_strategy(),
        w in 0.0f64..=1.0,
    ) {
        let words = &WORDS[..vectors.len()];
        let e = embedder_with(words, &vectors, &product).with_override("juliet", concept_vec.clone());
        let p = build_product_embedding(&e, "product", &[]).unwrap();
        let concept = ConnectingConcept {
            text: "juliet".into(),
            strategy: ConceptStrategy::FullGpt,
            score: None,
            provenance: Provenance::LlmRationale { entity_kind: blendkit_core::llm::EntityKind::Object },
            associated_entities: vec!["x".into()],
        };
        let pool: Vec<PoolScene> = words.iter().map(|t| PoolScene { text: t.to_string(), origin: SceneOrigin::ProductScenes }).collect();
        let got = select_product_scenes(&pool, &p, &concept, &e, w).unwrap();

        let q = oracle_product(&product);
        let scores: Vec<f64> = vectors
            .iter()
            .map(|v| w * oracle_cosine(v, &q) + (1.0 - w) * oracle_cosine(v, &concept_vec))
            .collect();
        let expected = oracle_top_k(&scores, 2);
        prop_assert_eq!(got.len(), expected.len());
        for (g, &want) in got.iter().zip(&expected) {
            let gi = words.iter().position(|t| *t == g.text).unwrap();
            prop_assert!((g.score.unwrap() - scores[want]).abs() < TOL);
            prop_assert!(gi == want || (scores[gi] - scores[want]).abs() < TOL);
        }
    }

    #[test]
    fn half_gpt_matches_oracle(
        vectors in prop::collection::vec(vec_strategy(), 1..=10),
        product in vec_strategy(),
        owners in prop::collection::vec(0usize..3, 10),
    ) {
        let words = &WORDS[..vectors.len()];
        let e = embedder_with(words, &vectors, &product);
        let p = build_product_embedding(&e, "product", &[]).unwrap();
        let names = ["Ann", "Bob", "Cy"];
        let entities = names.iter().enumerate().map(|(i, n)| entity(n, EntityCategory::Person, 3.0 - i as f64, i + 1)).collect();
        let attrs = words
            .iter()
            .zip(&owners)
            .map(|(w, &o)| attribute(names[o], EntityCategory::Person, AttributeType::Adjective, w))
            .collect();
        let kb = kb(&["Ann met Bob."], entities, attrs);
        let got = half_gpt_concepts(&kb, &p, &e).unwrap();

        let q = oracle_product(&product);
        let scores: Vec<f64> = vectors.iter().map(|v| oracle_cosine(&q, v)).collect();
        let expected = oracle_top_k(&scores, 5);
        prop_assert_eq!(got.len(), expected.len());
        for (g, &want) in got.iter().zip(&expected) {
            let gi = words.iter().position(|t| *t == g.text).unwrap();
            prop_assert!((g.score.unwrap() - scores[want]).abs() < TOL);
            prop_assert!(gi == want || (scores[gi] - scores[want]).abs() < TOL);
            prop_assert_eq!(&g.associated_entities, &vec![names[owners[gi]].to_string()]);
        }
    }
}
