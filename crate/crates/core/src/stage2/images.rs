//! Image search behind a narrow trait, with a deterministic placeholder
//! provider for offline runs and a Bing-style hosted adapter.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::diagnostics::{Diagnostics, WarningKind};

pub const IMAGES_PER_SCENE: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRef {
    pub url_or_path: String,
    pub query: String,
    pub provider: String,
}

#[derive(Debug, Clone, Error)]
#[error("image search failed: {0}")]
pub struct ImageSearchError(pub String);

pub trait ImageSearch: Send + Sync {
    fn search(&self, query: &str, limit: usize) -> Result<Vec<ImageRef>, ImageSearchError>;
}

/// Returns `limit` placeholder references derived from the query digest.
#[derive(Debug, Clone, Copy, Default)]
pub struct FixtureImageSearch;

impl ImageSearch for FixtureImageSearch {
    fn search(&self, query: &str, limit: usize) -> Result<Vec<ImageRef>, ImageSearchError> {
        let digest = hex::encode(Sha256::digest(query.as_bytes()));
        Ok((0..limit)
            .map(|i| ImageRef {
                url_or_path: format!("fixture://images/{}/{i}.jpg", &digest[..16]),
                query: query.to_string(),
                provider: "fixture".into(),
            })
            .collect())
    }
}

pub const DEFAULT_BING_ENDPOINT: &str = "https://api.bing.microsoft.com/v7.0/images/search";

/// Hosted image search speaking the Bing v7 image API.
pub struct BingImageSearch {
    endpoint: String,
    api_key: String,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct BingResponse {
    #[serde(default)]
    value: Vec<BingImage>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct BingImage {
    content_url: String,
}

impl BingImageSearch {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>, timeout: Duration) -> Result<Self, ImageSearchError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ImageSearchError(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            client,
        })
    }
}

impl ImageSearch for BingImageSearch {
    fn search(&self, query: &str, limit: usize) -> Result<Vec<ImageRef>, ImageSearchError> {
        let resp = self
            .client
            .get(&self.endpoint)
            .header("Ocp-Apim-Subscription-Key", &self.api_key)
            .query(&[("q", query), ("count", &limit.to_string()), ("safeSearch", "Strict")])
            .send()
            .map_err(|e| ImageSearchError(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(ImageSearchError(format!("HTTP {}", resp.status())));
        }
        let body: BingResponse = resp.json().map_err(|e| ImageSearchError(e.to_string()))?;
        Ok(body
            .value
            .into_iter()
            .take(limit)
            .map(|img| ImageRef {
                url_or_path: img.content_url,
                query: query.to_string(),
                provider: "bing".into(),
            })
            .collect())
    }
}

/// Up to three images for a scene. Failures and short result lists are
/// reported as warnings, never as errors.
pub fn fetch_images(scene_text: &str, provider: &dyn ImageSearch, diag: &mut Diagnostics) -> Vec<ImageRef> {
    match provider.search(scene_text, IMAGES_PER_SCENE) {
        Ok(mut images) => {
            images.truncate(IMAGES_PER_SCENE);
            if images.len() < IMAGES_PER_SCENE {
                diag.warn(
                    WarningKind::ImageShortfall,
                    format!("{} of {IMAGES_PER_SCENE} images for {scene_text:?}", images.len()),
                );
            }
            images
        }
        Err(e) => {
            diag.warn(WarningKind::ImageSearchFailure, format!("{scene_text:?}: {e}"));
            Vec::new()
        }
    }
}
