//! Cue → response word associations used to suggest related words for a
//! product term.
//!
//! Input is delimited text (comma or tab, detected from the header) with the
//! header `cue,response,weight`. Rows with a non-positive or unparseable
//! weight are rejected with their line number; a repeated `(cue, response)`
//! pair keeps its largest weight.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::diagnostics::{Diagnostics, WarningKind};

pub const DEFAULT_RELATED_K: usize = 10;

#[derive(Debug, Error)]
pub enum AssociationError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid association data: {0}")]
    InvalidData(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssociationEntry {
    pub cue: String,
    pub response: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RejectedRow {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub rejected: Vec<RejectedRow>,
    pub duplicates: usize,
}

/// Immutable association table keyed by case-folded cue.
#[derive(Debug, Clone, Default)]
pub struct AssociationTable {
    by_cue: BTreeMap<String, Vec<AssociationEntry>>,
}

impl AssociationTable {
    pub fn load(path: &Path, diag: &mut Diagnostics) -> Result<(Self, LoadReport), AssociationError> {
        let text = std::fs::read_to_string(path).map_err(|source| AssociationError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, diag)
    }

    pub fn parse(text: &str, diag: &mut Diagnostics) -> Result<(Self, LoadReport), AssociationError> {
        let header = text.lines().next().unwrap_or_default();
        let delimiter = if header.contains('\t') { b'\t' } else { b',' };
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());

        let headers = reader
            .headers()
            .map_err(|e| AssociationError::InvalidData(format!("header: {e}")))?
            .clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.eq_ignore_ascii_case(name))
                .ok_or_else(|| AssociationError::InvalidData(format!("missing '{name}' column")))
        };
        let (cue_col, resp_col, weight_col) = (col("cue")?, col("response")?, col("weight")?);

        let mut report = LoadReport::default();
        let mut pairs: BTreeMap<(String, String), AssociationEntry> = BTreeMap::new();
        for (i, record) in reader.records().enumerate() {
            let line = record
                .as_ref()
                .ok()
                .and_then(|r| r.position())
                .map_or(i + 2, |p| p.line() as usize);
            let record = match record {
                Ok(r) => r,
                Err(e) => {
                    report.rejected.push(RejectedRow { line, reason: e.to_string() });
                    continue;
                }
            };
            let field = |c: usize| record.get(c).unwrap_or("").to_string();
            let (cue, response, weight) = (field(cue_col), field(resp_col), field(weight_col));
            if cue.is_empty() || response.is_empty() {
                report.rejected.push(RejectedRow { line, reason: "empty cue or response".into() });
                continue;
            }
            let weight: f64 = match weight.parse() {
                Ok(w) if f64::is_finite(w) && w > 0.0 => w,
                Ok(w) => {
                    report.rejected.push(RejectedRow { line, reason: format!("weight {w} is not positive") });
                    continue;
                }
                Err(_) => {
                    report.rejected.push(RejectedRow { line, reason: format!("weight '{weight}' is not a number") });
                    continue;
                }
            };
            let key = (cue.to_lowercase(), response.to_lowercase());
            match pairs.get_mut(&key) {
                Some(existing) => {
                    report.duplicates += 1;
                    diag.warn(
                        WarningKind::DuplicateAssociation,
                        format!("line {line}: duplicate ({cue}, {response}); keeping max weight"),
                    );
                    if weight > existing.weight {
                        existing.weight = weight;
                    }
                }
                None => {
                    pairs.insert(key, AssociationEntry { cue, response, weight });
                }
            }
        }
        if pairs.is_empty() {
            return Err(AssociationError::InvalidData("no valid association rows".into()));
        }

        let mut by_cue: BTreeMap<String, Vec<AssociationEntry>> = BTreeMap::new();
        for ((cue, _), entry) in pairs {
            by_cue.entry(cue).or_default().push(entry);
        }
        for list in by_cue.values_mut() {
            list.sort_by(|a, b| {
                b.weight
                    .partial_cmp(&a.weight)
                    .unwrap_or(Ordering::Equal)
                    .then_with(|| a.response.cmp(&b.response))
            });
        }
        Ok((Self { by_cue }, report))
    }

    pub fn len(&self) -> usize {
        self.by_cue.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.by_cue.is_empty()
    }

    /// Up to `k` responses for `term`, by weight descending then
    /// alphabetically. The term itself is never returned; an unknown term
    /// yields an empty list.
    pub fn related_words(&self, term: &str, k: usize) -> Vec<String> {
        let folded = term.trim().to_lowercase();
        self.by_cue
            .get(&folded)
            .map(|list| {
                list.iter()
                    .filter(|e| e.response.to_lowercase() != folded)
                    .take(k)
                    .map(|e| e.response.clone())
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn entries(&self, term: &str) -> &[AssociationEntry] {
        self.by_cue
            .get(&term.trim().to_lowercase())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(text: &str) -> (AssociationTable, LoadReport, Diagnostics) {
        let mut diag = Diagnostics::new();
        let (t, r) = AssociationTable::parse(text, &mut diag).unwrap();
        (t, r, diag)
    }

    #[test]
    fn loads_rows_and_orders_by_weight() {
        let (t, r, _) = table("cue,response,weight\ncookie,food,0.4\ncookie,chocolate,0.3\n");
        assert_eq!(t.len(), 2);
        assert!(r.rejected.is_empty());
        assert_eq!(t.related_words("cookie", 2), ["food", "chocolate"]);
    }

    #[test]
    fn zero_weight_rejected_with_line_number() {
        let (t, r, _) = table("cue,response,weight\ncookie,food,0.4\ncookie,crumb,0\ncookie,milk,abc\n");
        assert_eq!(t.len(), 1);
        assert_eq!(r.rejected.len(), 2);
        assert_eq!(r.rejected[0].line, 3);
        assert_eq!(r.rejected[1].line, 4);
    }

    #[test]
    fn duplicate_keeps_max_weight_and_warns() {
        let (t, r, diag) = table("cue\tresponse\tweight\ncookie\tfood\t0.2\ncookie\tfood\t0.5\ncookie\tjar\t0.3\n");
        assert_eq!(r.duplicates, 1);
        assert_eq!(diag.count(WarningKind::DuplicateAssociation), 1);
        assert_eq!(t.entries("cookie")[0].weight, 0.5);
        assert_eq!(t.related_words("cookie", 5), ["food", "jar"]);
    }

    #[test]
    fn no_valid_rows_is_invalid_data() {
        let mut diag = Diagnostics::new();
        assert!(matches!(
            AssociationTable::parse("cue,response,weight\na,b,0\n", &mut diag),
            Err(AssociationError::InvalidData(_))
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        let mut diag = Diagnostics::new();
        assert!(matches!(
            AssociationTable::load(Path::new("/nonexistent/assoc.csv"), &mut diag),
            Err(AssociationError::Io { .. })
        ));
    }

    #[test]
    fn unknown_term_and_large_k() {
        let (t, _, _) = table("cue,response,weight\ncookie,food,0.4\ncookie,chocolate,0.3\n");
        assert!(t.related_words("spaceship", 3).is_empty());
        assert_eq!(t.related_words("cookie", 50).len(), 2);
        assert_eq!(t.related_words("Cookie", 1), ["food"]);
    }

    #[test]
    fn ties_are_alphabetical_and_cue_is_excluded() {
        let (t, _, _) = table("cue,response,weight\nsoap,wash,1\nsoap,bubble,1\nsoap,soap,5\n");
        assert_eq!(t.related_words("soap", 10), ["bubble", "wash"]);
    }

    proptest! {
        #[test]
        fn output_is_bounded_sorted_and_excludes_cue(
            rows in proptest::collection::vec(("[a-d]", "[a-f]", 1u32..5), 1..30),
            k in 1usize..8,
        ) {
            let mut text = String::from("cue,response,weight\n");
            for (c, r, w) in &rows {
                text.push_str(&format!("{c},{r},{w}\n"));
            }
            let mut diag = Diagnostics::new();
            let (t, _) = AssociationTable::parse(&text, &mut diag).unwrap();
            for cue in ["a", "b", "c", "d"] {
                let words = t.related_words(cue, k);
                prop_assert!(words.len() <= k);
                prop_assert!(!words.iter().any(|w| w == cue));
                let weights: Vec<f64> = words
                    .iter()
                    .map(|w| t.entries(cue).iter().find(|e| &e.response == w).unwrap().weight)
                    .collect();
                for (i, pair) in weights.windows(2).enumerate() {
                    prop_assert!(pair[0] > pair[1] || (pair[0] == pair[1] && words[i] < words[i + 1]));
                }
            }
        }
    }
}
