//! JSON-over-HTTP front end.
//!
//! | Method | Path                       | Body / query          | Response            |
//! |--------|----------------------------|-----------------------|---------------------|
//! | GET    | `/domains`                 |                       | `[DomainSummary]`   |
//! | GET    | `/related-words?term=&k=`  |                       | `[string]`          |
//! | POST   | `/blends`                  | `BlendRequest`        | `BlendResponse`     |
//! | GET    | `/healthz`                 |                       | `{"status": "ok"}`  |
//!
//! Errors use the body `{code, message, details}` with the status from
//! [`ServiceError::status`].

use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use blendkit_core::service::{BlendRequest, Engine, ServiceError};
use serde::Deserialize;
use tower_http::cors::CorsLayer;

#[derive(Clone)]
struct AppState {
    engine: Arc<Engine>,
    timeout: Duration,
}

pub struct ApiError(pub ServiceError);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.0.body())).into_response()
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

#[derive(Debug, Default, Deserialize)]
struct RelatedQuery {
    term: Option<String>,
    k: Option<String>,
}

async fn domains(State(state): State<AppState>) -> impl IntoResponse {
    Json(state.engine.domains())
}

async fn related_words(State(state): State<AppState>, Query(q): Query<RelatedQuery>) -> Result<Response, ApiError> {
    let k = match q.k.as_deref().map(str::trim).filter(|k| !k.is_empty()) {
        Some(k) => Some(
            k.parse::<usize>()
                .map_err(|_| ServiceError::InvalidRequest(format!("k must be a non-negative integer, got {k:?}")))?,
        ),
        None => None,
    };
    let words = state.engine.related_words(q.term.as_deref(), k)?;
    Ok(Json(words).into_response())
}

async fn blends(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let request: BlendRequest =
        serde_json::from_slice(&body).map_err(|e| ServiceError::InvalidRequest(format!("request body: {e}")))?;
    let engine = state.engine.clone();
    let task = tokio::task::spawn_blocking(move || engine.blend(&request));
    let response = match tokio::time::timeout(state.timeout, task).await {
        Ok(Ok(result)) => result?,
        Ok(Err(join)) => return Err(ServiceError::Internal(join.to_string()).into()),
        Err(_) => return Err(ServiceError::Timeout(state.timeout.as_secs()).into()),
    };
    Ok(([(header::CONTENT_TYPE, "application/json")], response.to_canonical_json()).into_response())
}

async fn healthz() -> impl IntoResponse {
    Json(serde_json::json!({ "status": "ok" }))
}

/// Builds the router. `timeout` bounds each blend request.
pub fn router(engine: Arc<Engine>, timeout: Duration, cors: bool) -> Router {
    let app = Router::new()
        .route("/domains", get(domains))
        .route("/related-words", get(related_words))
        .route("/blends", post(blends))
        .route("/healthz", get(healthz))
        .with_state(AppState { engine, timeout });
    if cors {
        app.layer(CorsLayer::permissive())
    } else {
        app
    }
}
