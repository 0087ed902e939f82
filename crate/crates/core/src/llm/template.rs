//! The four prompt templates and the request/cache-key model around them.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::GatewayError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    EntityAttributes,
    DirectAssociation,
    ProductScenes,
    ConceptScenes,
}

impl TemplateId {
    pub const ALL: [TemplateId; 4] = [
        TemplateId::EntityAttributes,
        TemplateId::DirectAssociation,
        TemplateId::ProductScenes,
        TemplateId::ConceptScenes,
    ];

    pub fn text(self) -> &'static str {
        match self {
            TemplateId::EntityAttributes => "What five {attribute_type} do you associate with {entity} in {domain}?",
            TemplateId::DirectAssociation => {
                "Which {entity_kind} in {domain} would you associate with {product}? Why? Please say your answer in the format of \"I would associate ... with ... because of ...\""
            }
            TemplateId::ProductScenes => "What are five scenes you associate with {product}?",
            TemplateId::ConceptScenes => "What three {product} scenes do you associate with {concept}?",
        }
    }

    /// Slot names in order of first appearance.
    pub fn slots(self) -> Vec<&'static str> {
        let text = self.text();
        let mut out = Vec::new();
        let mut rest = text;
        while let Some(open) = rest.find('{') {
            let close = rest[open..].find('}').expect("balanced template") + open;
            let name = &rest[open + 1..close];
            if !out.contains(&name) {
                out.push(name);
            }
            rest = &rest[close + 1..];
        }
        out
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::EntityAttributes => "entity_attributes",
            TemplateId::DirectAssociation => "direct_association",
            TemplateId::ProductScenes => "product_scenes",
            TemplateId::ConceptScenes => "concept_scenes",
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Decoding settings; part of the cache key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

pub const DEFAULT_MODEL: &str = "gpt-4o-mini";

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            model: DEFAULT_MODEL.to_string(),
            temperature: 0.0,
            max_tokens: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub template_id: TemplateId,
    pub slots: BTreeMap<String, String>,
    pub params: ModelParams,
}

impl PromptRequest {
    pub fn new<'a>(template_id: TemplateId, slots: impl IntoIterator<Item = (&'a str, &'a str)>, params: ModelParams) -> Self {
        Self {
            template_id,
            slots: slots.into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            params,
        }
    }

    /// SHA-256 over the canonical JSON of template id, slots and params.
    pub fn cache_key(&self) -> String {
        #[derive(Serialize)]
        struct KeyMaterial<'a> {
            template_id: TemplateId,
            slots: &'a BTreeMap<String, String>,
            params: &'a ModelParams,
        }
        let material = serde_json::to_string(&KeyMaterial {
            template_id: self.template_id,
            slots: &self.slots,
            params: &self.params,
        })
        .expect("key material serializes");
        hex::encode(Sha256::digest(material.as_bytes()))
    }
}

/// Substitutes every `{slot}` in the request's template.
///
/// Every template slot must be supplied with a non-empty value, and no other
/// slot may be present.
pub fn render_prompt(request: &PromptRequest) -> Result<String, GatewayError> {
    let expected = request.template_id.slots();
    for name in &expected {
        match request.slots.get(*name) {
            Some(v) if !v.trim().is_empty() => {}
            Some(_) => return Err(GatewayError::Template(format!("slot '{name}' is empty"))),
            None => {
                return Err(GatewayError::Template(format!(
                    "missing slot '{name}' for template {}",
                    request.template_id
                )))
            }
        }
    }
    if let Some(extra) = request.slots.keys().find(|k| !expected.contains(&k.as_str())) {
        return Err(GatewayError::Template(format!(
            "unknown slot '{extra}' for template {}",
            request.template_id
        )));
    }
    let mut out = request.template_id.text().to_string();
    for name in expected {
        out = out.replace(&format!("{{{name}}}"), &request.slots[name]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(t: TemplateId, slots: &[(&'static str, &'static str)]) -> PromptRequest {
        PromptRequest::new(t, slots.iter().copied(), ModelParams::default())
    }

    #[test]
    fn renders_entity_attribute_prompt() {
        let r = req(
            TemplateId::EntityAttributes,
            &[("attribute_type", "adjectives"), ("entity", "Chewbacca"), ("domain", "Star Wars")],
        );
        assert_eq!(
            render_prompt(&r).unwrap(),
            "What five adjectives do you associate with Chewbacca in Star Wars?"
        );
    }

    #[test]
    fn renders_scene_prompts() {
        let r = req(TemplateId::ConceptScenes, &[("product", "swimming"), ("concept", "racing")]);
        assert_eq!(render_prompt(&r).unwrap(), "What three swimming scenes do you associate with racing?");
        let r = req(TemplateId::ProductScenes, &[("product", "swimming")]);
        assert_eq!(render_prompt(&r).unwrap(), "What are five scenes you associate with swimming?");
    }

    #[test]
    fn renders_direct_association_prompt() {
        let r = req(
            TemplateId::DirectAssociation,
            &[("entity_kind", "character"), ("domain", "Star Wars"), ("product", "swimming")],
        );
        assert_eq!(
            render_prompt(&r).unwrap(),
            "Which character in Star Wars would you associate with swimming? Why? Please say your answer in the format of \"I would associate ... with ... because of ...\""
        );
    }

    #[test]
    fn missing_or_unknown_slot_is_template_error() {
        let r = req(TemplateId::EntityAttributes, &[("attribute_type", "adjectives"), ("entity", "Chewbacca")]);
        assert!(matches!(render_prompt(&r), Err(GatewayError::Template(_))));
        let r = req(TemplateId::ProductScenes, &[("product", "beer"), ("concept", "x")]);
        assert!(matches!(render_prompt(&r), Err(GatewayError::Template(_))));
    }

    #[test]
    fn slots_listed_in_order() {
        assert_eq!(TemplateId::DirectAssociation.slots(), ["entity_kind", "domain", "product"]);
    }

    #[test]
    fn cache_keys_distinguish_slots_and_params() {
        let a = req(TemplateId::ProductScenes, &[("product", "beer")]);
        let b = req(TemplateId::ProductScenes, &[("product", "wine")]);
        let mut c = a.clone();
        c.params.temperature = 0.7;
        let keys = [a.cache_key(), b.cache_key(), c.cache_key()];
        assert_eq!(keys[0], a.clone().cache_key());
        assert_eq!(keys[0].len(), 64);
        assert!(keys[0] != keys[1] && keys[0] != keys[2] && keys[1] != keys[2]);
    }
}
