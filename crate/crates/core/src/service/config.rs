//! Runtime configuration: built-in defaults, overridden by an optional TOML
//! file, overridden by environment variables. API keys come only from the
//! environment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ServiceError;
use crate::llm::template::DEFAULT_MODEL;
use crate::llm::transport::DEFAULT_CHAT_ENDPOINT;
use crate::stage2::images::DEFAULT_BING_ENDPOINT;

pub const ENV_CONFIG: &str = "BLENDKIT_CONFIG";
pub const ENV_LLM_API_KEY: &str = "BLENDKIT_LLM_API_KEY";
pub const ENV_IMAGE_API_KEY: &str = "BLENDKIT_IMAGE_API_KEY";
pub const ENV_EMBEDDING_API_KEY: &str = "BLENDKIT_EMBEDDING_API_KEY";
pub const ENV_CACHE_DIR: &str = "BLENDKIT_CACHE_DIR";
pub const ENV_FIXTURE_DIR: &str = "BLENDKIT_FIXTURE_DIR";
pub const ENV_KB_DIR: &str = "BLENDKIT_KB_DIR";
pub const ENV_ASSOCIATIONS: &str = "BLENDKIT_ASSOCIATIONS";
pub const ENV_OFFLINE: &str = "BLENDKIT_OFFLINE";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSettings {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    pub attempts: u32,
    pub retry_base_ms: u64,
}

impl Default for LlmSettings {
    fn default() -> Self {
        Self {
            endpoint: DEFAULT_CHAT_ENDPOINT.into(),
            model: DEFAULT_MODEL.into(),
            temperature: 0.0,
            max_tokens: 256,
            timeout_secs: 20,
            attempts: 3,
            retry_base_ms: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingBackend {
    Fixture,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSettings {
    pub provider: EmbeddingBackend,
    pub dimension: usize,
    /// Optional table of verbatim vectors for the fixture embedder.
    pub table: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub timeout_secs: u64,
}

impl Default for EmbeddingSettings {
    fn default() -> Self {
        Self {
            provider: EmbeddingBackend::Fixture,
            dimension: 64,
            table: None,
            endpoint: None,
            model: None,
            timeout_secs: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageBackend {
    Fixture,
    Bing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImageSettings {
    pub provider: ImageBackend,
    pub endpoint: String,
    pub timeout_secs: u64,
}

impl Default for ImageSettings {
    fn default() -> Self {
        Self {
            provider: ImageBackend::Fixture,
            endpoint: DEFAULT_BING_ENDPOINT.into(),
            timeout_secs: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub kb_dir: PathBuf,
    pub cache_dir: PathBuf,
    pub fixture_dir: Option<PathBuf>,
    pub associations: Option<PathBuf>,
    pub reference_corpus: Option<PathBuf>,
    pub gazetteer: Option<PathBuf>,
    pub offline: bool,
    pub request_timeout_secs: u64,
    pub llm: LlmSettings,
    pub embedding: EmbeddingSettings,
    pub images: ImageSettings,
    #[serde(skip)]
    pub secrets: Secrets,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            kb_dir: "data/kb".into(),
            cache_dir: "data/cache".into(),
            fixture_dir: None,
            associations: None,
            reference_corpus: None,
            gazetteer: None,
            offline: false,
            request_timeout_secs: 60,
            llm: LlmSettings::default(),
            embedding: EmbeddingSettings::default(),
            images: ImageSettings::default(),
            secrets: Secrets::default(),
        }
    }
}

#[derive(Clone, Default, PartialEq)]
pub struct Secrets {
    pub llm_api_key: Option<String>,
    pub image_api_key: Option<String>,
    pub embedding_api_key: Option<String>,
}

impl std::fmt::Debug for Secrets {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mask = |k: &Option<String>| if k.is_some() { "<set>" } else { "<unset>" };
        f.debug_struct("Secrets")
            .field("llm_api_key", &mask(&self.llm_api_key))
            .field("image_api_key", &mask(&self.image_api_key))
            .field("embedding_api_key", &mask(&self.embedding_api_key))
            .finish()
    }
}

fn parse_flag(name: &str, value: &str) -> Result<bool, ServiceError> {
    match value.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" | "" => Ok(false),
        other => Err(ServiceError::Config(format!("{name}: not a boolean: {other:?}"))),
    }
}

impl Config {
    /// Loads a TOML file; relative paths inside it resolve against the
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let mut config: Config = toml::from_str(&text).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        rebase(&mut config.kb_dir);
        rebase(&mut config.cache_dir);
        for p in [
            &mut config.fixture_dir,
            &mut config.associations,
            &mut config.reference_corpus,
            &mut config.gazetteer,
            &mut config.embedding.table,
        ]
        .into_iter()
        .flatten()
        {
            rebase(p);
        }
        Ok(config)
    }

    /// Defaults, then `file` (or the file named by `BLENDKIT_CONFIG`), then
    /// environment overrides.
    pub fn resolve(file: Option<&Path>, env: impl Fn(&str) -> Option<String>) -> Result<Self, ServiceError> {
        let file = file.map(Path::to_path_buf).or_else(|| env(ENV_CONFIG).map(PathBuf::from));
        let mut config = match file {
            Some(path) => Self::from_file(&path)?,
            None => Self::default(),
        };
        if let Some(v) = env(ENV_KB_DIR) {
            config.kb_dir = v.into();
        }
        if let Some(v) = env(ENV_CACHE_DIR) {
            config.cache_dir = v.into();
        }
        if let Some(v) = env(ENV_FIXTURE_DIR) {
            config.fixture_dir = Some(v.into());
        }
        if let Some(v) = env(ENV_ASSOCIATIONS) {
            config.associations = Some(v.into());
        }
        if let Some(v) = env(ENV_OFFLINE) {
            config.offline = parse_flag(ENV_OFFLINE, &v)?;
        }
        let non_empty = |k: &str| env(k).filter(|v| !v.trim().is_empty());
        config.secrets = Secrets {
            llm_api_key: non_empty(ENV_LLM_API_KEY),
            image_api_key: non_empty(ENV_IMAGE_API_KEY),
            embedding_api_key: non_empty(ENV_EMBEDDING_API_KEY),
        };
        Ok(config)
    }

    pub fn from_env(file: Option<&Path>) -> Result<Self, ServiceError> {
        Self::resolve(file, |k| std::env::var(k).ok())
    }
}
