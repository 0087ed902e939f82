//! Parsers for free-text LLM responses. Every parser returns either a clean
//! value or a typed error carrying the raw text.

use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::GatewayError;
use crate::kb::segment_plot;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedList {
    pub items: Vec<String>,
    pub expected: usize,
}

impl ParsedList {
    pub fn is_short(&self) -> bool {
        self.items.len() < self.expected
    }
}

fn enumerator_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?:^|\s)(\d{1,2})[\).]\s+").expect("valid regex"))
}

fn bullet_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*[-*•]\s+(.*)$").expect("valid regex"))
}

fn clean_item(s: &str) -> String {
    let mut s = s.trim();
    if let Some(cut) = s.find("\n\n") {
        s = s[..cut].trim();
    }
    let quotes: &[char] = &['"', '\'', '“', '”', '‘', '’'];
    loop {
        let before = s;
        s = s.trim().trim_end_matches(['.', ',', ';']).trim();
        if s.len() >= 2 && s.starts_with(quotes) && s.ends_with(quotes) {
            let first = s.chars().next().map_or(0, char::len_utf8);
            let last = s.chars().last().map_or(0, char::len_utf8);
            s = &s[first..s.len() - last];
        }
        if s == before {
            break;
        }
    }
    let s = s.strip_prefix("and ").unwrap_or(s);
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Splits on commas that are not inside double quotes.
fn split_commas(line: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut in_quote = false;
    let mut start = 0;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quote = !in_quote,
            '“' => in_quote = true,
            '”' => in_quote = false,
            ',' if !in_quote => {
                out.push(&line[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&line[start..]);
    out
}

fn quoted_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#""([^"]+)"|“([^”]+)”"#).expect("valid regex"))
}

/// Two or more quoted phrases separated only by spaces, commas or
/// semicolons.
fn quoted_items(text: &str) -> Option<Vec<String>> {
    let mut items = Vec::new();
    let mut cursor = 0;
    for caps in quoted_re().captures_iter(text) {
        let whole = caps.get(0).expect("match");
        if !text[cursor..whole.start()].chars().all(|c| c.is_whitespace() || c == ',' || c == ';') {
            return None;
        }
        let inner = caps.get(1).or_else(|| caps.get(2)).expect("one group matches");
        items.push(clean_item(inner.as_str()));
        cursor = whole.end();
    }
    let rest_ok = text[cursor..].chars().all(|c| c.is_whitespace() || matches!(c, ',' | ';' | '.'));
    (items.len() >= 2 && rest_ok).then_some(items)
}

fn numbered_items(text: &str) -> Option<Vec<String>> {
    let mut markers: Vec<(usize, usize)> = Vec::new(); // (marker start, content start)
    let mut next = 1;
    for caps in enumerator_re().captures_iter(text) {
        let number: usize = caps[1].parse().ok()?;
        if number == next {
            let digit = caps.get(1).expect("group 1");
            markers.push((digit.start(), caps.get(0).expect("match").end()));
            next += 1;
        }
    }
    let starts_listed = markers.first().is_some_and(|(s, _)| text[..*s].trim().is_empty() || text[..*s].trim_end().ends_with(':'));
    if markers.len() < 2 && !starts_listed {
        return None;
    }
    if markers.is_empty() {
        return None;
    }
    let items = markers
        .iter()
        .enumerate()
        .map(|(i, &(_, content))| {
            let end = markers.get(i + 1).map_or(text.len(), |&(s, _)| s);
            clean_item(&text[content..end])
        })
        .collect();
    Some(items)
}

/// Extracts list items from a numbered (`1)`, `1.`), bulleted,
/// newline-separated, quoted or comma-separated response.
///
/// Returns at most `expected_n` items; fewer is allowed and visible through
/// [`ParsedList::is_short`].
pub fn parse_enumerated_list(raw_text: &str, expected_n: usize) -> Result<ParsedList, GatewayError> {
    let text = raw_text.trim();
    let fail = || GatewayError::Parse(raw_text.to_string());
    if text.is_empty() {
        return Err(fail());
    }

    let candidates: Vec<String> = if let Some(items) = numbered_items(text) {
        items
    } else {
        let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        let bullets: Vec<String> = lines
            .iter()
            .filter_map(|l| bullet_re().captures(l).map(|c| clean_item(&c[1])))
            .collect();
        if !bullets.is_empty() {
            bullets
        } else if lines.len() >= 2 {
            lines.iter().map(|l| clean_item(l)).collect()
        } else if let Some(items) = quoted_items(text) {
            items
        } else {
            let parts = split_commas(text);
            if parts.len() < 2 {
                return Err(fail());
            }
            parts.into_iter().map(clean_item).collect()
        }
    };

    let items: Vec<String> = candidates.into_iter().filter(|s| !s.is_empty()).take(expected_n).collect();
    if items.is_empty() {
        return Err(fail());
    }
    Ok(ParsedList {
        items,
        expected: expected_n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Character,
    Organization,
    Location,
    Object,
    Action,
}

impl EntityKind {
    pub const ALL: [EntityKind; 5] = [
        EntityKind::Character,
        EntityKind::Organization,
        EntityKind::Location,
        EntityKind::Object,
        EntityKind::Action,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Character => "character",
            EntityKind::Organization => "organization",
            EntityKind::Location => "location",
            EntityKind::Object => "object",
            EntityKind::Action => "action",
        }
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectAssociation {
    pub entity: String,
    pub reason: String,
    pub entity_kind: EntityKind,
}

fn association_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?is)\bI\s+(?:would\s+)?associate\s+(.+?)\s+with\s+(.+?)\s+because(?:\s+of)?\s+(.+)")
            .expect("valid regex")
    })
}

/// Extracts the domain entity and the justification from an
/// "I (would) associate X with Y because of Z" answer.
///
/// The product term must occur in X or Y; the other side is the entity.
pub fn parse_direct_association(
    raw_text: &str,
    product_term: &str,
    entity_kind: EntityKind,
) -> Result<DirectAssociation, GatewayError> {
    let caps = association_re()
        .captures(raw_text)
        .ok_or_else(|| GatewayError::Parse(raw_text.to_string()))?;
    let left = clean_item(&caps[1]);
    let right = clean_item(&caps[2]);
    let rest = caps[3].trim();
    let first_sentence = segment_plot(rest)
        .ok()
        .and_then(|s| s.into_iter().next())
        .unwrap_or_else(|| rest.to_string());
    let reason = clean_item(&first_sentence);

    let product = product_term.trim().to_lowercase();
    let contains = |side: &str| !product.is_empty() && side.to_lowercase().contains(&product);
    let entity = if contains(&left) {
        right
    } else if contains(&right) {
        left
    } else {
        return Err(GatewayError::AmbiguousParse(raw_text.to_string()));
    };
    if entity.is_empty() || reason.is_empty() {
        return Err(GatewayError::Parse(raw_text.to_string()));
    }
    Ok(DirectAssociation {
        entity,
        reason,
        entity_kind,
    })
}
