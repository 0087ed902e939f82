//! Request/response front end over the whole pipeline: the domain catalog,
//! related-word lookup and blend generation, independent of any transport.
//!
//! An [`Engine`] is immutable once built and can serve concurrent requests.
//! The only shared mutable state underneath it is the LLM response cache.

pub mod config;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::association::{AssociationTable, DEFAULT_RELATED_K};
use crate::diagnostics::{Diagnostics, Warning, WarningKind};
use crate::kb::KnowledgeBase;
use crate::llm::{ChatCompletionsTransport, Gateway, ModelParams, ResponseStore, RetryPolicy};
use crate::semantic::{build_product_embedding, CachingEmbedder, EmbeddingProvider, FixtureEmbedder, HttpEmbedder, HttpEmbedderConfig, SemanticError};
use crate::stage1::{find_connecting_concepts, ConceptOptions, StageError, Strategy, StrategyBundle};
use crate::stage2::{assemble_blends, BingImageSearch, BlendSuggestion, FixtureImageSearch, ImageSearch, SceneOptions};

pub use config::Config;

#[derive(Debug, Clone, Error)]
pub enum ServiceError {
    #[error("missing parameter: {0}")]
    MissingParameter(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("unknown domain: {0}")]
    UnknownDomain(String),
    #[error("{} LLM response(s) missing from fixtures", missing_cache_keys.len())]
    FixtureMiss {
        missing_cache_keys: Vec<String>,
        warnings: Vec<Warning>,
    },
    #[error("provider failure: {0}")]
    Provider(String),
    #[error("request exceeded {0} s")]
    Timeout(u64),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("internal error: {0}")]
    Internal(String),
}

/// JSON error body: `{code, message, details}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    pub details: serde_json::Value,
}

impl ServiceError {
    pub fn status(&self) -> u16 {
        match self {
            ServiceError::MissingParameter(_) => 400,
            ServiceError::InvalidRequest(_) => 422,
            ServiceError::UnknownDomain(_) => 404,
            ServiceError::FixtureMiss { .. } => 424,
            ServiceError::Provider(_) => 502,
            ServiceError::Timeout(_) => 504,
            ServiceError::Config(_) | ServiceError::Internal(_) => 500,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::MissingParameter(_) => "missing_parameter",
            ServiceError::InvalidRequest(_) => "invalid_request",
            ServiceError::UnknownDomain(_) => "unknown_domain",
            ServiceError::FixtureMiss { .. } => "fixture_miss",
            ServiceError::Provider(_) => "provider_failure",
            ServiceError::Timeout(_) => "timeout",
            ServiceError::Config(_) => "config_error",
            ServiceError::Internal(_) => "internal_error",
        }
    }

    pub fn body(&self) -> ErrorBody {
        let details = match self {
            ServiceError::FixtureMiss {
                missing_cache_keys,
                warnings,
            } => serde_json::json!({ "missing_cache_keys": missing_cache_keys, "warnings": warnings }),
            ServiceError::UnknownDomain(id) => serde_json::json!({ "domain_id": id }),
            _ => serde_json::json!({}),
        };
        ErrorBody {
            code: self.code().to_string(),
            message: self.to_string(),
            details,
        }
    }
}

/// Everything a blend run talks to.
#[derive(Clone)]
pub struct Providers {
    pub embedder: Arc<dyn EmbeddingProvider>,
    pub gateway: Gateway,
    pub images: Arc<dyn ImageSearch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSummary {
    pub domain_id: String,
    pub display_name: String,
    pub sentences: usize,
    pub entities: usize,
    pub attributes: usize,
}

/// Read-only set of ingested knowledge bases keyed by domain id.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    domains: BTreeMap<String, Arc<KnowledgeBase>>,
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, kb: KnowledgeBase) -> Result<(), ServiceError> {
        let id = kb.domain_id().to_string();
        if self.domains.contains_key(&id) {
            return Err(ServiceError::Config(format!("duplicate domain id {id:?}")));
        }
        self.domains.insert(id, Arc::new(kb));
        Ok(())
    }

    /// Loads every `*.json` knowledge base in `dir`; a missing directory is
    /// an empty catalog.
    pub fn load_dir(dir: &Path) -> Result<Self, ServiceError> {
        let mut catalog = Self::new();
        if !dir.exists() {
            return Ok(catalog);
        }
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let kb = KnowledgeBase::load(&path).map_err(|e| ServiceError::Config(e.to_string()))?;
            catalog.insert(kb)?;
        }
        Ok(catalog)
    }

    pub fn get(&self, domain_id: &str) -> Option<&Arc<KnowledgeBase>> {
        self.domains.get(domain_id)
    }

    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }

    pub fn summaries(&self) -> Vec<DomainSummary> {
        self.domains
            .values()
            .map(|kb| DomainSummary {
                domain_id: kb.domain.domain_id.clone(),
                display_name: kb.domain.display_name.clone(),
                sentences: kb.sentences.len(),
                entities: kb.entities.len(),
                attributes: kb.attributes.len(),
            })
            .collect()
    }
}

fn all_strategies() -> Vec<Strategy> {
    Strategy::ALL.to_vec()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RequestOptions {
    pub cutoff: Option<f64>,
    pub drop_ratio: Option<f64>,
    /// Serve only from cache and fixtures, touching no network.
    pub offline: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlendRequest {
    pub domain_id: String,
    pub product_term: String,
    #[serde(default)]
    pub selected_related: Vec<String>,
    #[serde(default = "all_strategies")]
    pub strategies: Vec<Strategy>,
    #[serde(default)]
    pub options: RequestOptions,
}

impl BlendRequest {
    pub fn new(domain_id: impl Into<String>, product_term: impl Into<String>) -> Self {
        Self {
            domain_id: domain_id.into(),
            product_term: product_term.into(),
            selected_related: Vec::new(),
            strategies: all_strategies(),
            options: RequestOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_ms: u64,
    pub concepts_ms: u64,
    pub scenes_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlendResponse {
    pub request: BlendRequest,
    pub offline: bool,
    pub concepts: StrategyBundle,
    pub blends: Vec<BlendSuggestion>,
    pub warnings: Vec<Warning>,
    /// Wall-clock timings; omitted for offline runs so their output is
    /// byte-stable.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timing: Option<Timing>,
}

impl BlendResponse {
    /// Pretty JSON with object keys sorted, newline-terminated.
    pub fn to_canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("response serializes");
        let mut s = serde_json::to_string_pretty(&value).expect("value serializes");
        s.push('\n');
        s
    }
}

pub struct Engine {
    catalog: Catalog,
    associations: Option<AssociationTable>,
    offline: Providers,
    online: Option<Providers>,
    scene_options: SceneOptions,
}

fn provider_error(e: SemanticError) -> ServiceError {
    match e {
        SemanticError::Provider(p) => ServiceError::Provider(p.to_string()),
        other => ServiceError::InvalidRequest(other.to_string()),
    }
}

impl Engine {
    /// An engine that only ever uses `offline` providers.
    pub fn new(catalog: Catalog, associations: Option<AssociationTable>, offline: Providers) -> Self {
        Self {
            catalog,
            associations,
            offline,
            online: None,
            scene_options: SceneOptions::default(),
        }
    }

    /// Providers for requests that do not ask for offline mode.
    pub fn with_online(mut self, online: Providers) -> Self {
        self.online = Some(online);
        self
    }

    pub fn with_scene_options(mut self, options: SceneOptions) -> Self {
        self.scene_options = options;
        self
    }

    /// Wires providers from configuration. Online providers are only
    /// created when `config.offline` is false and an LLM key is present.
    pub fn from_config(config: &Config, diag: &mut Diagnostics) -> Result<Self, ServiceError> {
        let catalog = Catalog::load_dir(&config.kb_dir)?;
        let associations = match &config.associations {
            Some(path) => Some(
                AssociationTable::load(path, diag)
                    .map_err(|e| ServiceError::Config(e.to_string()))?
                    .0,
            ),
            None => None,
        };
        let cfg_err = |e: &dyn std::fmt::Display| ServiceError::Config(e.to_string());

        let fixture_embedder: Arc<dyn EmbeddingProvider> = match &config.embedding.table {
            Some(path) => Arc::new(FixtureEmbedder::from_table_file(path).map_err(|e| cfg_err(&e))?),
            None => Arc::new(FixtureEmbedder::new(config.embedding.dimension)),
        };
        let params = ModelParams {
            model: config.llm.model.clone(),
            temperature: config.llm.temperature,
            max_tokens: config.llm.max_tokens,
        };
        let open_gateway = || -> Result<Gateway, ServiceError> {
            let mut gw = Gateway::new(ResponseStore::open(&config.cache_dir).map_err(|e| cfg_err(&e))?)
                .with_params(params.clone())
                .with_retry(RetryPolicy {
                    attempts: config.llm.attempts,
                    base_delay: Duration::from_millis(config.llm.retry_base_ms),
                });
            if let Some(dir) = &config.fixture_dir {
                gw = gw.with_fixtures(ResponseStore::open(dir).map_err(|e| cfg_err(&e))?);
            }
            Ok(gw)
        };
        let gateway = open_gateway()?;
        let offline = Providers {
            embedder: fixture_embedder.clone(),
            gateway: gateway.clone(),
            images: Arc::new(FixtureImageSearch),
        };
        let mut engine = Self::new(catalog, associations, offline);

        let Some(llm_key) = config.secrets.llm_api_key.clone().filter(|_| !config.offline) else {
            return Ok(engine);
        };
        let transport = ChatCompletionsTransport::new(&config.llm.endpoint, llm_key, Duration::from_secs(config.llm.timeout_secs))
            .map_err(|e| cfg_err(&e))?;
        let embedder: Arc<dyn EmbeddingProvider> = match config.embedding.provider {
            config::EmbeddingBackend::Fixture => fixture_embedder,
            config::EmbeddingBackend::Http => {
                let (Some(endpoint), Some(model)) = (config.embedding.endpoint.clone(), config.embedding.model.clone()) else {
                    return Err(ServiceError::Config("http embedding needs endpoint and model".into()));
                };
                let http = HttpEmbedder::new(
                    HttpEmbedderConfig {
                        endpoint,
                        model,
                        dimension: config.embedding.dimension,
                        query_prefix: "query: ".into(),
                        passage_prefix: "passage: ".into(),
                        timeout_secs: config.embedding.timeout_secs,
                    },
                    config.secrets.embedding_api_key.clone(),
                )
                .map_err(|e| cfg_err(&e))?;
                Arc::new(CachingEmbedder::new(Arc::new(http)))
            }
        };
        let images: Arc<dyn ImageSearch> = match (config.images.provider, &config.secrets.image_api_key) {
            (config::ImageBackend::Bing, Some(key)) => Arc::new(
                BingImageSearch::new(&config.images.endpoint, key.clone(), Duration::from_secs(config.images.timeout_secs))
                    .map_err(|e| cfg_err(&e))?,
            ),
            (config::ImageBackend::Bing, None) => {
                diag.warn(WarningKind::ImageSearchFailure, "no image API key; using placeholder images");
                Arc::new(FixtureImageSearch)
            }
            (config::ImageBackend::Fixture, _) => Arc::new(FixtureImageSearch),
        };
        engine = engine.with_online(Providers {
            embedder,
            gateway: gateway.with_transport(Arc::new(transport)),
            images,
        });
        Ok(engine)
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    /// The providers a request with the given offline flag would use.
    pub fn providers(&self, offline: bool) -> &Providers {
        match (&self.online, offline) {
            (Some(p), false) => p,
            _ => &self.offline,
        }
    }

    pub fn has_online(&self) -> bool {
        self.online.is_some()
    }

    pub fn domains(&self) -> Vec<DomainSummary> {
        self.catalog.summaries()
    }

    /// Words associated with `term`; an unknown term or a missing table
    /// gives an empty list.
    pub fn related_words(&self, term: Option<&str>, k: Option<usize>) -> Result<Vec<String>, ServiceError> {
        let term = term
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .ok_or_else(|| ServiceError::MissingParameter("term".into()))?;
        let k = k.unwrap_or(DEFAULT_RELATED_K);
        Ok(self
            .associations
            .as_ref()
            .map(|t| t.related_words(term, k))
            .unwrap_or_default())
    }

    fn validate(&self, request: &BlendRequest) -> Result<Arc<KnowledgeBase>, ServiceError> {
        if request.product_term.trim().is_empty() {
            return Err(ServiceError::MissingParameter("product_term".into()));
        }
        if request.strategies.is_empty() {
            return Err(ServiceError::InvalidRequest("strategies must not be empty".into()));
        }
        if let Some(r) = request.options.drop_ratio {
            if !(r > 0.0 && r <= 1.0) {
                return Err(ServiceError::InvalidRequest(format!("drop_ratio {r} is outside (0, 1]")));
            }
        }
        if let Some(c) = request.options.cutoff {
            if !(-1.0..=1.0).contains(&c) {
                return Err(ServiceError::InvalidRequest(format!("cutoff {c} is outside [-1, 1]")));
            }
        }
        self.catalog
            .get(&request.domain_id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownDomain(request.domain_id.clone()))
    }

    /// Runs both stages for one request.
    pub fn blend(&self, request: &BlendRequest) -> Result<BlendResponse, ServiceError> {
        let kb = self.validate(request)?;
        let started = Instant::now();
        let (providers, offline) = match (&self.online, request.options.offline) {
            (Some(p), false) => (p, false),
            _ => (&self.offline, true),
        };
        let gateway = if offline {
            providers.gateway.clone().offline(true)
        } else {
            providers.gateway.clone()
        };
        let embedder = providers.embedder.as_ref();
        let mut diag = Diagnostics::new();

        let product = build_product_embedding(embedder, &request.product_term, &request.selected_related).map_err(provider_error)?;
        let options = ConceptOptions {
            strategies: request.strategies.iter().copied().collect(),
            cutoff: request.options.cutoff,
            drop_ratio: request.options.drop_ratio,
        };
        let bundle = find_connecting_concepts(&kb, &product, embedder, &gateway, &options, &mut diag);
        let concepts_done = started.elapsed();

        let blends = match assemble_blends(
            &kb,
            &bundle,
            &product,
            embedder,
            &gateway,
            providers.images.as_ref(),
            &self.scene_options,
            &mut diag,
        ) {
            Ok(b) => b,
            Err(StageError::EmptyResult(msg)) => {
                diag.warn(WarningKind::EmptyStrategy, msg);
                Vec::new()
            }
            Err(StageError::Semantic(e)) => return Err(provider_error(e)),
            Err(e) => return Err(ServiceError::Internal(e.to_string())),
        };

        if offline && !diag.missing_cache_keys.is_empty() {
            return Err(ServiceError::FixtureMiss {
                missing_cache_keys: diag.missing_cache_keys,
                warnings: diag.warnings,
            });
        }
        if blends.is_empty() && diag.count(WarningKind::ProviderFailure) > 0 {
            let causes: Vec<&str> = diag
                .warnings
                .iter()
                .filter(|w| w.kind == WarningKind::ProviderFailure)
                .map(|w| w.message.as_str())
                .collect();
            return Err(ServiceError::Provider(causes.join("; ")));
        }
        let total = started.elapsed();
        Ok(BlendResponse {
            request: request.clone(),
            offline,
            concepts: bundle,
            blends,
            warnings: diag.warnings,
            timing: (!offline).then(|| Timing {
                total_ms: total.as_millis() as u64,
                concepts_ms: concepts_done.as_millis() as u64,
                scenes_ms: (total - concepts_done).as_millis() as u64,
            }),
        })
    }
}
