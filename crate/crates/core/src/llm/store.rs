//! Content-addressed response store, used both as the live cache and as the
//! offline fixture set.
//!
//! Layout:
//!
//! ```text
//! <dir>/manifest.json          {"schema_version": 1, "entries": {<key>: {...}}}
//! <dir>/responses/<key>.txt    raw response text
//! ```
//!
//! Each manifest entry records the response file (relative to `<dir>`), the
//! template id, slots, model params and the rendered prompt so fixtures stay
//! reviewable. Writes go through a temp file and a rename.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::template::{render_prompt, ModelParams, PromptRequest, TemplateId};
use super::GatewayError;
use crate::fsutil::write_atomic;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub template_id: TemplateId,
    pub slots: BTreeMap<String, String>,
    pub params: ModelParams,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub entries: BTreeMap<String, ManifestEntry>,
}

impl Default for Manifest {
    fn default() -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA_VERSION,
            entries: BTreeMap::new(),
        }
    }
}

#[derive(Debug)]
pub struct ResponseStore {
    dir: PathBuf,
    manifest: Mutex<Manifest>,
}

fn store_err(path: &Path, e: impl std::fmt::Display) -> GatewayError {
    GatewayError::Store(format!("{}: {e}", path.display()))
}

impl ResponseStore {
    /// Opens `dir`, creating nothing until the first write. A missing
    /// directory is an empty store.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, GatewayError> {
        let dir = dir.into();
        let manifest_path = dir.join(MANIFEST_FILE);
        let manifest = if manifest_path.exists() {
            let text = std::fs::read_to_string(&manifest_path).map_err(|e| store_err(&manifest_path, e))?;
            let m: Manifest = serde_json::from_str(&text).map_err(|e| store_err(&manifest_path, e))?;
            if m.schema_version != MANIFEST_SCHEMA_VERSION {
                return Err(store_err(&manifest_path, format!("unsupported schema_version {}", m.schema_version)));
            }
            m
        } else {
            Manifest::default()
        };
        Ok(Self {
            dir,
            manifest: Mutex::new(manifest),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn len(&self) -> usize {
        self.manifest.lock().expect("manifest lock").entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn keys(&self) -> Vec<String> {
        self.manifest.lock().expect("manifest lock").entries.keys().cloned().collect()
    }

    pub fn get(&self, key: &str) -> Result<Option<String>, GatewayError> {
        let file = match self.manifest.lock().expect("manifest lock").entries.get(key) {
            Some(entry) => self.dir.join(&entry.file),
            None => return Ok(None),
        };
        match std::fs::read_to_string(&file) {
            Ok(text) => Ok(Some(text)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(store_err(&file, e)),
        }
    }

    /// Stores a response for `request`; last writer wins.
    pub fn put(&self, request: &PromptRequest, text: &str) -> Result<String, GatewayError> {
        let key = request.cache_key();
        let prompt = render_prompt(request)?;
        let rel = format!("responses/{key}.txt");
        let path = self.dir.join(&rel);
        write_atomic(&path, text.as_bytes()).map_err(|e| store_err(&path, e))?;

        let mut manifest = self.manifest.lock().expect("manifest lock");
        manifest.entries.insert(
            key.clone(),
            ManifestEntry {
                file: rel,
                template_id: request.template_id,
                slots: request.slots.clone(),
                params: request.params.clone(),
                prompt,
            },
        );
        let mut json = serde_json::to_string_pretty(&*manifest).expect("manifest serializes");
        json.push('\n');
        let manifest_path = self.dir.join(MANIFEST_FILE);
        write_atomic(&manifest_path, json.as_bytes()).map_err(|e| store_err(&manifest_path, e))?;
        Ok(key)
    }

    pub fn entry(&self, key: &str) -> Option<ManifestEntry> {
        self.manifest.lock().expect("manifest lock").entries.get(key).cloned()
    }
}

/// Hand-authored fixture file (TOML):
///
/// ```toml
/// [[response]]
/// template = "product_scenes"
/// slots = { product = "beer" }
/// text = "1) a guy walks into a bar and orders a beer 2) ..."
/// ```
///
/// `params` may be given as an inline table; it defaults to the deterministic
/// settings.
#[derive(Debug, Clone, Deserialize)]
pub struct AuthoredFixtures {
    #[serde(default, rename = "response")]
    pub responses: Vec<AuthoredResponse>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct AuthoredResponse {
    pub template: TemplateId,
    pub slots: BTreeMap<String, String>,
    #[serde(default)]
    pub params: Option<ModelParams>,
    pub text: String,
}

impl AuthoredFixtures {
    pub fn parse(text: &str) -> Result<Self, GatewayError> {
        toml::from_str(text).map_err(|e| GatewayError::Store(format!("authored fixtures: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path).map_err(|e| store_err(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            GatewayError::Store(m) => GatewayError::Store(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Writes every authored response into `store`, returning the keys.
    pub fn import_into(&self, store: &ResponseStore, default_params: &ModelParams) -> Result<Vec<String>, GatewayError> {
        self.responses
            .iter()
            .map(|r| {
                let request = PromptRequest {
                    template_id: r.template,
                    slots: r.slots.clone(),
                    params: r.params.clone().unwrap_or_else(|| default_params.clone()),
                };
                store.put(&request, &r.text)
            })
            .collect()
    }
}
