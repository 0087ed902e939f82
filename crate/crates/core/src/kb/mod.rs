//! Per-domain knowledge bases built from plot-summary text.
//!
//! A knowledge base bundles the coreference-resolved plot sentences, the top
//! entities per category and up to five LLM-derived attributes per entity and
//! attribute type. It is persisted as one pretty-printed JSON document per
//! domain (see `docs/kb-format.md`).

pub mod coref;
pub mod entities;
pub mod segment;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{Diagnostics, WarningKind};
use crate::text::fold_key;

pub use coref::{CoreferenceResolver, IdentityResolver, TableResolver, WordSubstitution};
pub use entities::{
    extract_entities, EntityTagger, GazetteerTagger, NullTagger, ReferenceCorpus, TagLabel, TaggedSpan,
    MAX_PER_CATEGORY,
};
pub use segment::segment_plot;

pub const KB_SCHEMA_VERSION: u32 = 1;
pub const ATTRIBUTES_PER_SLOT: usize = 5;
const MAX_ENTITIES: usize = 4 * MAX_PER_CATEGORY;
const MAX_ATTRIBUTES: usize = MAX_ENTITIES * 3 * ATTRIBUTES_PER_SLOT;

#[derive(Debug, Error)]
pub enum KbError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl KbError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        KbError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainConfig {
    pub domain_id: String,
    pub display_name: String,
    pub plot_source: Vec<PathBuf>,
    pub reference_corpus: PathBuf,
}

impl DomainConfig {
    pub fn validate(&self) -> Result<(), KbError> {
        if self.domain_id.trim().is_empty() {
            return Err(KbError::InvalidInput("domain_id is empty".into()));
        }
        if self.display_name.trim().is_empty() {
            return Err(KbError::InvalidInput("display_name is empty".into()));
        }
        if self.plot_source.is_empty() {
            return Err(KbError::InvalidInput("no plot source given".into()));
        }
        Ok(())
    }

    /// Concatenates all plot files, separated by a blank line.
    pub fn read_plot(&self) -> Result<String, KbError> {
        let mut parts = Vec::new();
        for path in &self.plot_source {
            let text = std::fs::read_to_string(path).map_err(|e| KbError::io(path, e))?;
            if text.trim().is_empty() {
                return Err(KbError::InvalidInput(format!("{} is empty", path.display())));
            }
            parts.push(text);
        }
        Ok(parts.join("\n\n"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlotSentence {
    pub index: usize,
    pub raw_text: String,
    pub resolved_text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityCategory {
    Person,
    Organization,
    Location,
    Object,
}

impl EntityCategory {
    pub const ALL: [EntityCategory; 4] = [
        EntityCategory::Person,
        EntityCategory::Organization,
        EntityCategory::Location,
        EntityCategory::Object,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub name: String,
    pub category: EntityCategory,
    pub salience: f64,
    pub rank: usize,
    pub first_sentence: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeType {
    Activity,
    Adjective,
    Catchphrase,
}

impl AttributeType {
    pub const ALL: [AttributeType; 3] = [AttributeType::Activity, AttributeType::Adjective, AttributeType::Catchphrase];

    /// The plural noun used in prompts.
    pub fn plural(self) -> &'static str {
        match self {
            AttributeType::Activity => "activities",
            AttributeType::Adjective => "adjectives",
            AttributeType::Catchphrase => "catchphrases",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "activity" | "activities" => Some(AttributeType::Activity),
            "adjective" | "adjectives" => Some(AttributeType::Adjective),
            "catchphrase" | "catchphrases" => Some(AttributeType::Catchphrase),
            _ => None,
        }
    }
}

impl fmt::Display for AttributeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttributeType::Activity => "activity",
            AttributeType::Adjective => "adjective",
            AttributeType::Catchphrase => "catchphrase",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityAttribute {
    pub entity: String,
    pub category: EntityCategory,
    pub attribute_type: AttributeType,
    pub text: String,
    pub source_prompt_key: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeBase {
    pub schema_version: u32,
    pub domain: DomainConfig,
    pub sentences: Vec<PlotSentence>,
    pub entities: Vec<Entity>,
    pub attributes: Vec<EntityAttribute>,
}

/// Attributes returned by one LLM call for one (entity, type) slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchedAttributes {
    pub items: Vec<String>,
    pub cache_key: String,
}

#[derive(Debug, Clone, Error)]
#[error("{message}")]
pub struct AttributeFetchError {
    pub message: String,
    /// Set when the failure was an offline fixture miss.
    pub missing_cache_key: Option<String>,
}

/// Something that can answer "what five {type} do you associate with
/// {entity} in {domain}?".
pub trait AttributeSource {
    fn fetch_attributes(
        &self,
        entity: &str,
        attribute_type: AttributeType,
        domain_display_name: &str,
    ) -> Result<FetchedAttributes, AttributeFetchError>;
}

impl KnowledgeBase {
    pub fn domain_id(&self) -> &str {
        &self.domain.domain_id
    }

    pub fn entity(&self, name: &str) -> Option<&Entity> {
        let key = fold_key(name);
        self.entities.iter().find(|e| fold_key(&e.name) == key)
    }

    pub fn attributes_of(&self, entity: &str, attribute_type: AttributeType) -> Vec<&EntityAttribute> {
        self.attributes
            .iter()
            .filter(|a| a.entity == entity && a.attribute_type == attribute_type)
            .collect()
    }

    /// Checks every structural invariant of a persisted knowledge base.
    pub fn validate(&self) -> Result<(), KbError> {
        let bad = |m: String| Err(KbError::InvalidData(m));
        if self.schema_version != KB_SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {}", self.schema_version));
        }
        self.domain.validate()?;
        if self.sentences.is_empty() {
            return bad("knowledge base has no sentences".into());
        }
        let mut seen = HashSet::new();
        for s in &self.sentences {
            if s.resolved_text.trim().is_empty() {
                return bad(format!("sentence {} has empty resolved text", s.index));
            }
            if !seen.insert(s.index) {
                return bad(format!("duplicate sentence index {}", s.index));
            }
        }
        if self.entities.len() > MAX_ENTITIES {
            return bad(format!("{} entities exceeds {MAX_ENTITIES}", self.entities.len()));
        }
        for cat in EntityCategory::ALL {
            let mut list: Vec<&Entity> = self.entities.iter().filter(|e| e.category == cat).collect();
            list.sort_by_key(|e| e.rank);
            for (i, e) in list.iter().enumerate() {
                if e.rank != i + 1 || e.rank > MAX_PER_CATEGORY {
                    return bad(format!("entity '{}' has rank {} in {:?}", e.name, e.rank, cat));
                }
                if !(e.salience >= 0.0 && e.salience.is_finite()) {
                    return bad(format!("entity '{}' has salience {}", e.name, e.salience));
                }
            }
            if list.windows(2).any(|w| w[1].salience > w[0].salience) {
                return bad(format!("salience increases with rank in {cat:?}"));
            }
        }
        if self.attributes.len() > MAX_ATTRIBUTES {
            return bad(format!("{} attributes exceeds {MAX_ATTRIBUTES}", self.attributes.len()));
        }
        let names: HashSet<(&str, EntityCategory)> =
            self.entities.iter().map(|e| (e.name.as_str(), e.category)).collect();
        let mut per_slot: BTreeMap<(&str, AttributeType), usize> = BTreeMap::new();
        for a in &self.attributes {
            if a.text.trim().is_empty() {
                return bad(format!("empty attribute for '{}'", a.entity));
            }
            if !names.contains(&(a.entity.as_str(), a.category)) {
                return bad(format!("attribute references unknown entity '{}'", a.entity));
            }
            let n = per_slot.entry((a.entity.as_str(), a.attribute_type)).or_default();
            *n += 1;
            if *n > ATTRIBUTES_PER_SLOT {
                return bad(format!("more than {ATTRIBUTES_PER_SLOT} {} attributes for '{}'", a.attribute_type, a.entity));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("knowledge base serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, KbError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| KbError::InvalidData(e.to_string()))?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == KB_SCHEMA_VERSION as u64 => {}
            Some(v) => return Err(KbError::InvalidData(format!("unsupported schema_version {v}"))),
            None => return Err(KbError::InvalidData("missing schema_version".into())),
        }
        let kb: KnowledgeBase = serde_json::from_value(value).map_err(|e| KbError::InvalidData(e.to_string()))?;
        kb.validate()?;
        Ok(kb)
    }

    /// Writes atomically (temp file + rename).
    pub fn save(&self, path: &Path) -> Result<(), KbError> {
        crate::fsutil::write_atomic(path, self.to_json().as_bytes()).map_err(|e| KbError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, KbError> {
        let text = std::fs::read_to_string(path).map_err(|e| KbError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            KbError::InvalidData(m) => KbError::InvalidData(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

/// Segments, resolves and ranks a domain's plot; attributes are left empty.
pub fn ingest_domain(
    config: &DomainConfig,
    resolver: &dyn CoreferenceResolver,
    tagger: &dyn EntityTagger,
    diag: &mut Diagnostics,
) -> Result<KnowledgeBase, KbError> {
    config.validate()?;
    let plot = config.read_plot()?;
    let raw = segment_plot(&plot)?;
    let sentences = coref::resolve_coreferences(&raw, resolver, diag)?;
    let reference = ReferenceCorpus::load_dir(&config.reference_corpus)?;
    let entities = extract_entities(&sentences, tagger, &reference, MAX_PER_CATEGORY, diag)?;
    let kb = KnowledgeBase {
        schema_version: KB_SCHEMA_VERSION,
        domain: config.clone(),
        sentences,
        entities,
        attributes: Vec::new(),
    };
    kb.validate()?;
    Ok(kb)
}

/// Fetches up to five attributes for every retained entity and attribute
/// type, replacing any attributes already present.
///
/// A failed slot is left empty and recorded; the remaining slots are still
/// fetched.
pub fn populate_attributes(kb: &mut KnowledgeBase, source: &dyn AttributeSource, diag: &mut Diagnostics) {
    let mut attributes = Vec::new();
    for entity in &kb.entities {
        for attribute_type in AttributeType::ALL {
            match source.fetch_attributes(&entity.name, attribute_type, &kb.domain.display_name) {
                Ok(fetched) => {
                    let mut seen = HashSet::new();
                    let items: Vec<String> = fetched
                        .items
                        .iter()
                        .map(|s| s.trim().to_string())
                        .filter(|s| !s.is_empty() && seen.insert(fold_key(s)))
                        .take(ATTRIBUTES_PER_SLOT)
                        .collect();
                    if items.len() < ATTRIBUTES_PER_SLOT {
                        diag.warn(
                            WarningKind::AttributeShortfall,
                            format!("{} of '{}': got {} of {ATTRIBUTES_PER_SLOT}", attribute_type.plural(), entity.name, items.len()),
                        );
                    }
                    attributes.extend(items.into_iter().map(|text| EntityAttribute {
                        entity: entity.name.clone(),
                        category: entity.category,
                        attribute_type,
                        text,
                        source_prompt_key: fetched.cache_key.clone(),
                    }));
                }
                Err(e) => {
                    if let Some(key) = &e.missing_cache_key {
                        diag.fixture_miss(key);
                    }
                    diag.warn(
                        WarningKind::AttributeFetchFailure,
                        format!("{} of '{}': {e}", attribute_type.plural(), entity.name),
                    );
                }
            }
        }
    }
    kb.attributes = attributes;
}

/// Full build: ingest plus attribute fetch.
pub fn build_knowledge_base(
    config: &DomainConfig,
    resolver: &dyn CoreferenceResolver,
    tagger: &dyn EntityTagger,
    source: &dyn AttributeSource,
    diag: &mut Diagnostics,
) -> Result<KnowledgeBase, KbError> {
    let mut kb = ingest_domain(config, resolver, tagger, diag)?;
    populate_attributes(&mut kb, source, diag);
    kb.validate()?;
    Ok(kb)
}
