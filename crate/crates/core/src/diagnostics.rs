//! Warnings collected while a pipeline degrades instead of failing.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningKind {
    ResolverFailure,
    TaggerFailure,
    AttributeFetchFailure,
    AttributeShortfall,
    DuplicateAssociation,
    ParseFailure,
    AmbiguousParse,
    ListShortfall,
    FixtureMiss,
    ProviderFailure,
    ImageShortfall,
    ImageSearchFailure,
    EmptyProductPool,
    ConceptSkipped,
    EmptyStrategy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Warning {
    pub kind: WarningKind,
    pub message: String,
}

/// Append-only sink threaded through the pipeline.
///
/// Cache keys that missed in offline mode are tracked separately so the
/// service can report them as a unit.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub warnings: Vec<Warning>,
    pub missing_cache_keys: Vec<String>,
}

impl Diagnostics {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn warn(&mut self, kind: WarningKind, message: impl Into<String>) {
        let message = message.into();
        log::warn!("{kind:?}: {message}");
        self.warnings.push(Warning { kind, message });
    }

    pub fn fixture_miss(&mut self, key: &str) {
        if !self.missing_cache_keys.iter().any(|k| k == key) {
            self.missing_cache_keys.push(key.to_string());
        }
    }

    /// Appends another sink, preserving its order.
    pub fn merge(&mut self, other: Diagnostics) {
        self.warnings.extend(other.warnings);
        for key in other.missing_cache_keys {
            self.fixture_miss(&key);
        }
    }

    pub fn count(&self, kind: WarningKind) -> usize {
        self.warnings.iter().filter(|w| w.kind == kind).count()
    }

    pub fn is_empty(&self) -> bool {
        self.warnings.is_empty() && self.missing_cache_keys.is_empty()
    }
}
