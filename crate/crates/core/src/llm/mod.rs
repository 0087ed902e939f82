//! All LLM interaction: prompt templates, cached completion, offline fixture
//! mode and response parsing.

pub mod parse;
pub mod store;
pub mod template;
pub mod transport;

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::{AttributeFetchError, AttributeSource, AttributeType, FetchedAttributes, ATTRIBUTES_PER_SLOT};

pub use parse::{parse_direct_association, parse_enumerated_list, DirectAssociation, EntityKind, ParsedList};
pub use store::{AuthoredFixtures, ResponseStore};
pub use template::{render_prompt, ModelParams, PromptRequest, TemplateId};
pub use transport::{ChatCompletionsTransport, LlmTransport, TransportError};

#[derive(Debug, Clone, Error)]
pub enum GatewayError {
    #[error("template error: {0}")]
    Template(String),
    #[error("no fixture for cache key {key} (prompt: {prompt})")]
    FixtureMiss { key: String, prompt: String },
    #[error("LLM provider error: {0}")]
    Provider(String),
    #[error("could not parse LLM response: {0:?}")]
    Parse(String),
    #[error("product term not found on either side of: {0:?}")]
    AmbiguousParse(String),
    #[error("response store error: {0}")]
    Store(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub raw_text: String,
    pub cached: bool,
    pub cache_key: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

/// Cache-first completion front end.
///
/// Lookup order is the writable cache, then the read-only fixture store.
/// On a miss the transport is called (unless offline) and the response is
/// written to the cache. Clones share the same stores and transport.
#[derive(Clone)]
pub struct Gateway {
    cache: Arc<ResponseStore>,
    fixtures: Option<Arc<ResponseStore>>,
    transport: Option<Arc<dyn LlmTransport>>,
    offline: bool,
    retry: RetryPolicy,
    params: ModelParams,
}

impl Gateway {
    pub fn new(cache: ResponseStore) -> Self {
        Self {
            cache: Arc::new(cache),
            fixtures: None,
            transport: None,
            offline: true,
            retry: RetryPolicy::default(),
            params: ModelParams::default(),
        }
    }

    pub fn with_fixtures(mut self, fixtures: ResponseStore) -> Self {
        self.fixtures = Some(Arc::new(fixtures));
        self
    }

    /// Attaches a transport and switches to online mode.
    pub fn with_transport(mut self, transport: Arc<dyn LlmTransport>) -> Self {
        self.transport = Some(transport);
        self.offline = false;
        self
    }

    pub fn offline(mut self, offline: bool) -> Self {
        self.offline = offline;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_params(mut self, params: ModelParams) -> Self {
        self.params = params;
        self
    }

    pub fn is_offline(&self) -> bool {
        self.offline || self.transport.is_none()
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn cache(&self) -> &ResponseStore {
        &self.cache
    }

    pub fn request<'a>(&self, template: TemplateId, slots: impl IntoIterator<Item = (&'a str, &'a str)>) -> PromptRequest {
        PromptRequest::new(template, slots, self.params.clone())
    }

    pub fn complete(&self, request: &PromptRequest) -> Result<LlmResponse, GatewayError> {
        let prompt = render_prompt(request)?;
        let cache_key = request.cache_key();
        if let Some(raw_text) = self.cache.get(&cache_key)? {
            return Ok(LlmResponse { raw_text, cached: true, cache_key });
        }
        if let Some(fixtures) = &self.fixtures {
            if let Some(raw_text) = fixtures.get(&cache_key)? {
                return Ok(LlmResponse { raw_text, cached: true, cache_key });
            }
        }
        let transport = match (&self.transport, self.offline) {
            (Some(t), false) => t,
            _ => return Err(GatewayError::FixtureMiss { key: cache_key, prompt }),
        };

        let mut last_error = String::new();
        for attempt in 0..self.retry.attempts.max(1) {
            if attempt > 0 {
                std::thread::sleep(self.retry.base_delay * 2u32.pow(attempt - 1));
            }
            match transport.complete(&prompt, &request.params) {
                Ok(raw_text) => {
                    self.cache.put(request, &raw_text)?;
                    return Ok(LlmResponse { raw_text, cached: false, cache_key });
                }
                Err(e) => {
                    log::warn!("LLM attempt {} failed: {e}", attempt + 1);
                    last_error = e.message.clone();
                    if !e.retryable {
                        break;
                    }
                }
            }
        }
        Err(GatewayError::Provider(last_error))
    }

    pub fn entity_attributes_request(&self, entity: &str, attribute_type: AttributeType, domain: &str) -> PromptRequest {
        self.request(
            TemplateId::EntityAttributes,
            [("attribute_type", attribute_type.plural()), ("entity", entity), ("domain", domain)],
        )
    }

    pub fn direct_association_request(&self, kind: EntityKind, domain: &str, product: &str) -> PromptRequest {
        self.request(
            TemplateId::DirectAssociation,
            [("entity_kind", kind.as_str()), ("domain", domain), ("product", product)],
        )
    }

    pub fn product_scenes_request(&self, product: &str) -> PromptRequest {
        self.request(TemplateId::ProductScenes, [("product", product)])
    }

    pub fn concept_scenes_request(&self, product: &str, concept: &str) -> PromptRequest {
        self.request(TemplateId::ConceptScenes, [("product", product), ("concept", concept)])
    }
}

impl AttributeSource for Gateway {
    fn fetch_attributes(
        &self,
        entity: &str,
        attribute_type: AttributeType,
        domain_display_name: &str,
    ) -> Result<FetchedAttributes, AttributeFetchError> {
        let request = self.entity_attributes_request(entity, attribute_type, domain_display_name);
        let response = self.complete(&request).map_err(|e| AttributeFetchError {
            missing_cache_key: match &e {
                GatewayError::FixtureMiss { key, .. } => Some(key.clone()),
                _ => None,
            },
            message: e.to_string(),
        })?;
        let parsed = parse_enumerated_list(&response.raw_text, ATTRIBUTES_PER_SLOT).map_err(|e| AttributeFetchError {
            message: e.to_string(),
            missing_cache_key: None,
        })?;
        Ok(FetchedAttributes {
            items: parsed.items,
            cache_key: response.cache_key,
        })
    }
}
