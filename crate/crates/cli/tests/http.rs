//! The JSON endpoints, driven through the router without a socket.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use blendkit_cli::http::router;
use blendkit_core::diagnostics::Diagnostics;
use blendkit_core::service::{Config, Engine};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tempfile::TempDir;
use tower::ServiceExt;

fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn app() -> (TempDir, Router) {
    let cache = tempfile::tempdir().unwrap();
    let mut config = Config::from_file(&workspace_root().join("blendkit.toml")).unwrap();
    config.cache_dir = cache.path().to_path_buf();
    config.offline = true;
    let engine = Engine::from_config(&config, &mut Diagnostics::new()).unwrap();
    (cache, router(Arc::new(engine), Duration::from_secs(30), false))
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, body)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (status, body) = send(app, Request::get(uri).body(Body::empty()).unwrap()).await;
    (status, serde_json::from_slice(&body).unwrap())
}

async fn post(app: &Router, body: &str) -> (StatusCode, Vec<u8>) {
    let req = Request::post("/blends")
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    send(app, req).await
}

#[tokio::test]
async fn health_and_domains() {
    let (_c, app) = app();
    assert_eq!(get(&app, "/healthz").await, (StatusCode::OK, json!({"status": "ok"})));
    let (status, body) = get(&app, "/domains").await;
    assert_eq!(status, StatusCode::OK);
    let ids: Vec<&str> = body.as_array().unwrap().iter().map(|d| d["domain_id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["star_wars", "wizard_of_oz"]);
    assert_eq!(body[0]["display_name"], "Star Wars");
}

#[tokio::test]
async fn related_words_endpoint() {
    let (_c, app) = app();
    assert_eq!(get(&app, "/related-words?term=cookie").await, (StatusCode::OK, json!(["food", "chocolate"])));
    assert_eq!(get(&app, "/related-words?term=cookie&k=1").await, (StatusCode::OK, json!(["food"])));

    let (status, body) = get(&app, "/related-words").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "missing_parameter");
    let (status, body) = get(&app, "/related-words?term=cookie&k=many").await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(body["message"].as_str().unwrap().contains("many"));
}

#[tokio::test]
async fn blend_endpoint_serves_the_golden_response() {
    let (_c, app) = app();
    let body = r#"{"domain_id": "star_wars", "product_term": "shampoo", "options": {"offline": true}}"#;
    let (status, bytes) = post(&app, body).await;
    assert_eq!(status, StatusCode::OK);
    let golden = std::fs::read_to_string(workspace_root().join("fixtures/golden/star_wars_shampoo.json")).unwrap();
    assert_eq!(String::from_utf8(bytes).unwrap(), golden);
}

#[tokio::test]
async fn blend_strategy_subset() {
    let (_c, app) = app();
    let body = r#"{"domain_id": "star_wars", "product_term": "shampoo", "strategies": ["no_gpt"], "options": {"offline": true}}"#;
    let (status, bytes) = post(&app, body).await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_slice(&bytes).unwrap();
    assert!(v["concepts"].get("half_gpt").is_none() && v["concepts"].get("full_gpt").is_none());
    let blends = v["blends"].as_array().unwrap();
    assert!(!blends.is_empty());
    assert!(blends.iter().all(|b| b["concept"]["strategy"] == "no_gpt"));
    assert!(blends.iter().all(|b| b["pop_scenes"].as_array().unwrap().len() == 1));
}

#[tokio::test]
async fn blend_errors_map_to_statuses() {
    let (_c, app) = app();
    let cases = [
        (r#"{"domain_id": "dune", "product_term": "shampoo"}"#, 404, "unknown_domain"),
        (r#"{"domain_id": "star_wars", "product_term": ""}"#, 400, "missing_parameter"),
        (r#"{"domain_id": "star_wars"}"#, 422, "invalid_request"),
        (r#"{"domain_id": "star_wars", "product_term": "x", "colour": 1}"#, 422, "invalid_request"),
        ("not json", 422, "invalid_request"),
        (r#"{"domain_id": "star_wars", "product_term": "shampoo", "strategies": []}"#, 422, "invalid_request"),
        (r#"{"domain_id": "star_wars", "product_term": "shampoo", "options": {"cutoff": 2.0}}"#, 422, "invalid_request"),
    ];
    for (body, status, code) in cases {
        let (got, bytes) = post(&app, body).await;
        let v: Value = serde_json::from_slice(&bytes).unwrap();
        assert_eq!((got.as_u16(), v["code"].as_str().unwrap()), (status, code), "{body}");
        assert!(!v["message"].as_str().unwrap().is_empty());
    }
}

#[tokio::test]
async fn offline_fixture_miss_lists_cache_keys() {
    let (_c, app) = app();
    let body = r#"{"domain_id": "star_wars", "product_term": "toaster", "options": {"offline": true}}"#;
    let (status, bytes) = post(&app, body).await;
    assert_eq!(status.as_u16(), 424);
    let v: Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(v["code"], "fixture_miss");
    let keys = v["details"]["missing_cache_keys"].as_array().unwrap();
    assert!(!keys.is_empty());
    assert!(keys.iter().all(|k| k.as_str().unwrap().len() == 64));
}
