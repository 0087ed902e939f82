//! Annotation bookkeeping for judging generated blends: two-annotator OR
//! aggregation, per-strategy success rates, Cohen's kappa, Pearson r and
//! attribute relevance reports.
//!
//! Input CSV schemas (headers required, extra columns rejected):
//!
//! ```text
//! item_id,pair_id,strategy,question,annotator_id,value
//! c01,star_wars/shampoo,no_gpt,q1_pop_related,ann1,true
//!
//! entity,attribute_type,annotator_id,relevant_count
//! Chewbacca,adjectives,ann1,4
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::AttributeType;
use crate::stage1::Strategy;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("incomplete annotation: {0}")]
    IncompleteAnnotation(String),
    #[error("no records: {0}")]
    EmptyResult(String),
    #[error("kappa is undefined when expected agreement is 1")]
    UndefinedKappa,
    #[error("correlation is undefined: {0}")]
    UndefinedCorrelation(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Question {
    Q1PopRelated,
    Q2ProductRelated,
    Q3PopScene,
    Q4ProductScene,
}

impl Question {
    pub const ALL: [Question; 4] = [
        Question::Q1PopRelated,
        Question::Q2ProductRelated,
        Question::Q3PopScene,
        Question::Q4ProductScene,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Question::Q1PopRelated => "q1_pop_related",
            Question::Q2ProductRelated => "q2_product_related",
            Question::Q3PopScene => "q3_pop_scene",
            Question::Q4ProductScene => "q4_product_scene",
        }
    }
}

/// One annotator's true/false judgement of one question about one item.
/// `pair_id` names the (domain, product) pair the item was generated for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub item_id: String,
    pub pair_id: String,
    pub strategy: Strategy,
    pub question: Question,
    pub annotator_id: String,
    pub value: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeCountRecord {
    pub entity: String,
    pub attribute_type: AttributeType,
    pub annotator_id: String,
    pub relevant_count: u8,
}

/// True when at least one annotator said true.
pub fn aggregate_or(a: Option<bool>, b: Option<bool>) -> Result<bool, EvalError> {
    match (a, b) {
        (Some(a), Some(b)) => Ok(a || b),
        _ => Err(EvalError::IncompleteAnnotation("expected two annotator values".into())),
    }
}

pub fn concept_success(q1: bool, q2: bool) -> bool {
    q1 && q2
}

/// Values of exactly two annotators, ordered by annotator id.
fn two_values<T: Copy>(mut values: Vec<(&str, T)>, what: &str) -> Result<(T, T), EvalError> {
    values.sort_by(|a, b| a.0.cmp(b.0));
    let distinct: BTreeSet<&str> = values.iter().map(|v| v.0).collect();
    if values.len() != 2 || distinct.len() != 2 {
        return Err(EvalError::IncompleteAnnotation(format!(
            "{what} has {} annotation(s) from {} annotator(s), expected 2",
            values.len(),
            distinct.len()
        )));
    }
    Ok((values[0].1, values[1].1))
}

type ItemKey<'a> = (&'a str, &'a str, Strategy);
type PairedAnnotations<'a> = BTreeMap<(ItemKey<'a>, Question), (bool, bool)>;

/// Annotator pairs per item and question, in (pair, item) order.
fn paired(records: &[AnnotationRecord]) -> Result<PairedAnnotations<'_>, EvalError> {
    let mut groups: BTreeMap<(ItemKey<'_>, Question), Vec<(&str, bool)>> = BTreeMap::new();
    let mut item_meta: BTreeMap<&str, (&str, Strategy)> = BTreeMap::new();
    for r in records {
        let meta = item_meta.entry(&r.item_id).or_insert((&r.pair_id, r.strategy));
        if *meta != (r.pair_id.as_str(), r.strategy) {
            return Err(EvalError::InvalidInput(format!(
                "item {} appears with different pair or strategy",
                r.item_id
            )));
        }
        groups
            .entry(((&r.pair_id, &r.item_id, r.strategy), r.question))
            .or_default()
            .push((&r.annotator_id, r.value));
    }
    groups
        .into_iter()
        .map(|(k, v)| {
            let what = format!("item {} {}", k.0 .1, k.1.as_str());
            two_values(v, &what).map(|p| (k, p))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptOutcome {
    pub pair_id: String,
    pub item_id: String,
    pub strategy: Strategy,
    pub success: bool,
}

/// Concept success for every item carrying both concept questions.
pub fn concept_outcomes(records: &[AnnotationRecord]) -> Result<Vec<ConceptOutcome>, EvalError> {
    let pairs = paired(records)?;
    let items: BTreeSet<ItemKey<'_>> = pairs.keys().map(|k| k.0).collect();
    let mut out = Vec::new();
    for item in items {
        let agg = |q| pairs.get(&(item, q)).map(|&(a, b)| a || b);
        match (agg(Question::Q1PopRelated), agg(Question::Q2ProductRelated)) {
            (Some(q1), Some(q2)) => out.push(ConceptOutcome {
                pair_id: item.0.to_string(),
                item_id: item.1.to_string(),
                strategy: item.2,
                success: concept_success(q1, q2),
            }),
            (None, None) => {}
            _ => {
                return Err(EvalError::IncompleteAnnotation(format!(
                    "item {} has only one of the two concept questions",
                    item.1
                )))
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub success_rate: f64,
    pub at_least_one_rate: f64,
    pub concepts: usize,
    pub pairs: usize,
}

/// Mean concept success, and the fraction of (domain, product) pairs with at
/// least one successful concept, for one strategy.
pub fn strategy_report(records: &[AnnotationRecord], strategy: Strategy) -> Result<StrategyReport, EvalError> {
    let outcomes: Vec<ConceptOutcome> = concept_outcomes(records)?
        .into_iter()
        .filter(|o| o.strategy == strategy)
        .collect();
    if outcomes.is_empty() {
        return Err(EvalError::EmptyResult(format!("no annotated concepts for {strategy}")));
    }
    let mut by_pair: BTreeMap<&str, bool> = BTreeMap::new();
    for o in &outcomes {
        *by_pair.entry(&o.pair_id).or_insert(false) |= o.success;
    }
    let successes = outcomes.iter().filter(|o| o.success).count();
    let hit_pairs = by_pair.values().filter(|&&hit| hit).count();
    Ok(StrategyReport {
        success_rate: successes as f64 / outcomes.len() as f64,
        at_least_one_rate: hit_pairs as f64 / by_pair.len() as f64,
        concepts: outcomes.len(),
        pairs: by_pair.len(),
    })
}

/// Two-rater, two-category Cohen's kappa with marginal-product expected
/// agreement.
pub fn cohens_kappa(pairs: &[(bool, bool)]) -> Result<f64, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyResult("kappa needs at least one pair".into()));
    }
    let n = pairs.len() as f64;
    let agree = pairs.iter().filter(|(a, b)| a == b).count() as f64;
    let a_true = pairs.iter().filter(|(a, _)| *a).count() as f64 / n;
    let b_true = pairs.iter().filter(|(_, b)| *b).count() as f64 / n;
    let po = agree / n;
    let pe = a_true * b_true + (1.0 - a_true) * (1.0 - b_true);
    if (1.0 - pe).abs() < 1e-12 {
        return Err(EvalError::UndefinedKappa);
    }
    Ok((po - pe) / (1.0 - pe))
}

pub fn pearson_r(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    if xs.len() != ys.len() {
        return Err(EvalError::InvalidInput(format!("lengths differ: {} vs {}", xs.len(), ys.len())));
    }
    if xs.len() < 2 {
        return Err(EvalError::InvalidInput("correlation needs at least two points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::UndefinedCorrelation("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeRow {
    /// Attribute type name, or `All`.
    pub label: String,
    pub items: usize,
    pub mean_count: f64,
    pub percent: f64,
    /// Pearson r between the two annotators; `None` when undefined.
    pub irr: Option<f64>,
}

/// One row per attribute type present, followed by an `All` row.
pub fn attribute_report(records: &[AttributeCountRecord]) -> Result<Vec<AttributeRow>, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyResult("no attribute count records".into()));
    }
    let mut groups: BTreeMap<(AttributeType, &str), Vec<(&str, f64)>> = BTreeMap::new();
    for r in records {
        if r.relevant_count > 5 {
            return Err(EvalError::InvalidInput(format!(
                "{} {}: count {} is above 5",
                r.entity, r.attribute_type, r.relevant_count
            )));
        }
        groups
            .entry((r.attribute_type, &r.entity))
            .or_default()
            .push((&r.annotator_id, f64::from(r.relevant_count)));
    }
    let mut per_type: BTreeMap<AttributeType, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for ((ty, entity), values) in groups {
        let (a, b) = two_values(values, &format!("{entity} {ty}"))?;
        let slot = per_type.entry(ty).or_default();
        slot.0.push(a);
        slot.1.push(b);
    }

    let row = |label: String, xs: &[f64], ys: &[f64]| {
        let mean = xs.iter().zip(ys).map(|(a, b)| (a + b) / 2.0).sum::<f64>() / xs.len() as f64;
        AttributeRow {
            label,
            items: xs.len(),
            mean_count: mean,
            percent: mean / 5.0 * 100.0,
            irr: pearson_r(xs, ys).ok(),
        }
    };
    let mut rows = Vec::new();
    let (mut all_x, mut all_y) = (Vec::new(), Vec::new());
    for (ty, (xs, ys)) in &per_type {
        rows.push(row(ty.plural().to_string(), xs, ys));
        all_x.extend_from_slice(xs);
        all_y.extend_from_slice(ys);
    }
    rows.push(row("All".to_string(), &all_x, &all_y));
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRow {
    pub strategy: Strategy,
    #[serde(flatten)]
    pub report: StrategyReport,
    /// Fraction of items with an aggregated true, per scene question.
    pub pop_scene_rate: Option<f64>,
    pub product_scene_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub strategies: Vec<StrategyRow>,
    /// Kappa over every (item, question) pair; `None` when undefined.
    pub kappa_overall: Option<f64>,
    pub kappa_by_question: BTreeMap<Question, Option<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub attributes: Option<Vec<AttributeRow>>,
}

pub fn evaluate(
    annotations: &[AnnotationRecord],
    attributes: Option<&[AttributeCountRecord]>,
) -> Result<EvalReport, EvalError> {
    if annotations.is_empty() {
        return Err(EvalError::EmptyResult("no annotation records".into()));
    }
    let pairs = paired(annotations)?;
    let mut strategies = Vec::new();
    for strategy in Strategy::ALL {
        let report = match strategy_report(annotations, strategy) {
            Ok(r) => r,
            Err(EvalError::EmptyResult(_)) => continue,
            Err(e) => return Err(e),
        };
        let rate = |q: Question| {
            let vals: Vec<bool> = pairs
                .iter()
                .filter(|(k, _)| k.0 .2 == strategy && k.1 == q)
                .map(|(_, &(a, b))| a || b)
                .collect();
            (!vals.is_empty()).then(|| vals.iter().filter(|&&v| v).count() as f64 / vals.len() as f64)
        };
        strategies.push(StrategyRow {
            strategy,
            report,
            pop_scene_rate: rate(Question::Q3PopScene),
            product_scene_rate: rate(Question::Q4ProductScene),
        });
    }
    let all: Vec<(bool, bool)> = pairs.values().copied().collect();
    let mut kappa_by_question = BTreeMap::new();
    for q in Question::ALL {
        let qs: Vec<(bool, bool)> = pairs.iter().filter(|(k, _)| k.1 == q).map(|(_, v)| *v).collect();
        if !qs.is_empty() {
            kappa_by_question.insert(q, cohens_kappa(&qs).ok());
        }
    }
    Ok(EvalReport {
        strategies,
        kappa_overall: cohens_kappa(&all).ok(),
        kappa_by_question,
        attributes: attributes.map(attribute_report).transpose()?,
    })
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.digits$}"))
}

impl EvalReport {
    /// Plain-text tables for terminal output.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<10} {:>8} {:>8} {:>8} {:>8} {:>10} {:>10}", "strategy", "concepts", "pairs", "success", ">=1", "pop_scene", "prod_scene");
        for row in &self.strategies {
            let _ = writeln!(
                s,
                "{:<10} {:>8} {:>8} {:>8.3} {:>8.3} {:>10} {:>10}",
                row.strategy.as_str(),
                row.report.concepts,
                row.report.pairs,
                row.report.success_rate,
                row.report.at_least_one_rate,
                fmt_opt(row.pop_scene_rate, 3),
                fmt_opt(row.product_scene_rate, 3),
            );
        }
        let _ = writeln!(s, "\nkappa overall: {}", fmt_opt(self.kappa_overall, 3));
        for (q, k) in &self.kappa_by_question {
            let _ = writeln!(s, "kappa {}: {}", q.as_str(), fmt_opt(*k, 3));
        }
        if let Some(rows) = &self.attributes {
            let _ = writeln!(s, "\n{:<12} {:>6} {:>6} {:>8} {:>8}", "attribute", "items", "avg", "percent", "irr");
            for r in rows {
                let _ = writeln!(
                    s,
                    "{:<12} {:>6} {:>6.2} {:>7.1}% {:>8}",
                    r.label,
                    r.items,
                    r.mean_count,
                    r.percent,
                    fmt_opt(r.irr, 2)
                );
            }
        }
        s
    }
}

fn csv_err(path: &Path, message: impl Into<String>) -> EvalError {
    EvalError::Csv {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "t" | "1" | "yes" | "y" => Some(true),
        "false" | "f" | "0" | "no" | "n" => Some(false),
        _ => None,
    }
}

fn read_rows(path: &Path, text: &str, expected: &[&str]) -> Result<Vec<(u64, csv::StringRecord)>, EvalError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| csv_err(path, e.to_string()))?.clone();
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(csv_err(path, format!("expected header {}, found {}", expected.join(","), got.join(","))));
    }
    reader
        .records()
        .map(|r| {
            let r = r.map_err(|e| csv_err(path, e.to_string()))?;
            let line = r.position().map_or(0, |p| p.line());
            Ok((line, r))
        })
        .collect()
}

pub const ANNOTATION_HEADER: [&str; 6] = ["item_id", "pair_id", "strategy", "question", "annotator_id", "value"];
pub const ATTRIBUTE_COUNT_HEADER: [&str; 4] = ["entity", "attribute_type", "annotator_id", "relevant_count"];

pub fn parse_annotations(path: &Path, text: &str) -> Result<Vec<AnnotationRecord>, EvalError> {
    read_rows(path, text, &ANNOTATION_HEADER)?
        .into_iter()
        .map(|(line, r)| {
            let bad = |what: &str| csv_err(path, format!("line {line}: invalid {what}"));
            let question = Question::ALL
                .into_iter()
                .find(|q| q.as_str() == &r[3])
                .ok_or_else(|| bad("question"))?;
            Ok(AnnotationRecord {
                item_id: r[0].to_string(),
                pair_id: r[1].to_string(),
                strategy: Strategy::parse(&r[2]).ok_or_else(|| bad("strategy"))?,
                question,
                annotator_id: r[4].to_string(),
                value: parse_bool(&r[5]).ok_or_else(|| bad("value"))?,
            })
        })
        .collect()
}

pub fn parse_attribute_counts(path: &Path, text: &str) -> Result<Vec<AttributeCountRecord>, EvalError> {
    read_rows(path, text, &ATTRIBUTE_COUNT_HEADER)?
        .into_iter()
        .map(|(line, r)| {
            let bad = |what: &str| csv_err(path, format!("line {line}: invalid {what}"));
            let count: u8 = r[3].parse().map_err(|_| bad("relevant_count"))?;
            if count > 5 {
                return Err(bad("relevant_count (must be 0-5)"));
            }
            Ok(AttributeCountRecord {
                entity: r[0].to_string(),
                attribute_type: AttributeType::parse(&r[1]).ok_or_else(|| bad("attribute_type"))?,
                annotator_id: r[2].to_string(),
                relevant_count: count,
            })
        })
        .collect()
}

pub fn load_annotations(path: &Path) -> Result<Vec<AnnotationRecord>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| csv_err(path, e.to_string()))?;
    parse_annotations(path, &text)
}

pub fn load_attribute_counts(path: &Path) -> Result<Vec<AttributeCountRecord>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| csv_err(path, e.to_string()))?;
    parse_attribute_counts(path, &text)
}
