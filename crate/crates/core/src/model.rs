//! Domain vocabulary shared by every other module: entities, reviews,
//! extraction records, subjective attributes, markers, marker summaries, and
//! fuzzy expressions, plus JSONL input loading and whole-database validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::normalize;

/// An objective attribute value: a 64-bit float or a string. Comparators on
/// strings are equality-only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Number(f64),
    Text(String),
}

impl fmt::Display for AttrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttrValue::Number(n) => write!(f, "{n}"),
            AttrValue::Text(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Entity {
    pub id: String,
    #[serde(rename = "attrs", default)]
    pub objective_attrs: BTreeMap<String, AttrValue>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Review {
    pub entity_id: String,
    pub review_id: String,
    pub text: String,
    /// ISO-8601 calendar date (`YYYY-MM-DD`). Lexicographic order on this
    /// format is chronological order. A review without a date is treated as
    /// always in range by date-filtered aggregation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<String>,
}

/// One (aspect term, opinion term) pair with provenance. `attribute` stays
/// empty until classification assigns it.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExtractionRecord {
    pub entity_id: String,
    pub review_id: String,
    #[serde(rename = "aspect")]
    pub aspect_term: String,
    #[serde(rename = "opinion")]
    pub opinion_term: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute: Option<String>,
}

impl ExtractionRecord {
    /// Canonical phrase: lowercase `<opinion term> <aspect term>` with
    /// punctuation stripped, single spaces.
    pub fn phrase(&self) -> String {
        normalize(&format!("{} {}", self.opinion_term, self.aspect_term))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    #[serde(rename = "linear")]
    LinearlyOrdered,
    Categorical,
}

/// A designated representative phrase in a linguistic domain, serving as an
/// aggregation landmark.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Marker {
    pub name: String,
    pub representative_phrase: String,
    pub embedding: Vec<f64>,
    /// Lexicon sentiment of the representative phrase, in [−1, 1].
    pub sentiment: f64,
}

/// Designer-provided aspect/opinion seed terms for one attribute.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SeedSet {
    #[serde(rename = "name")]
    pub attribute: String,
    pub aspects: BTreeSet<String>,
    pub opinions: BTreeSet<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SubjectiveAttribute {
    pub name: String,
    pub kind: AttributeKind,
    pub markers: Vec<Marker>,
    pub seeds: SeedSet,
}

impl SubjectiveAttribute {
    pub fn marker(&self, name: &str) -> Option<&Marker> {
        self.markers.iter().find(|m| m.name == name)
    }
}

/// Per-(entity, attribute) aggregate: histogram over markers plus average
/// sentiment and centroid embedding. This is the queryable view.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MarkerSummary {
    pub entity_id: String,
    pub attribute: String,
    pub counts: BTreeMap<String, u64>,
    pub total: u64,
    pub avg_sentiment: f64,
    pub centroid: Vec<f64>,
    pub per_marker_sentiment: BTreeMap<String, f64>,
}

impl MarkerSummary {
    pub fn empty(entity_id: &str, attribute: &str, dim: usize) -> Self {
        Self {
            entity_id: entity_id.to_string(),
            attribute: attribute.to_string(),
            counts: BTreeMap::new(),
            total: 0,
            avg_sentiment: 0.0,
            centroid: vec![0.0; dim],
            per_marker_sentiment: BTreeMap::new(),
        }
    }

    pub fn count(&self, marker: &str) -> u64 {
        self.counts.get(marker).copied().unwrap_or(0)
    }

    pub fn fraction(&self, marker: &str) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(marker) as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
            Comparator::Eq => "=",
            Comparator::Ne => "!=",
        };
        write!(f, "{s}")
    }
}

impl Comparator {
    pub fn eval_number(&self, left: f64, right: f64) -> bool {
        match self {
            Comparator::Lt => left < right,
            Comparator::Le => left <= right,
            Comparator::Gt => left > right,
            Comparator::Ge => left >= right,
            Comparator::Eq => left == right,
            Comparator::Ne => left != right,
        }
    }

    /// Strings support equality comparators only; ordering comparators are
    /// false on strings.
    pub fn eval_text(&self, left: &str, right: &str) -> bool {
        match self {
            Comparator::Eq => left == right,
            Comparator::Ne => left != right,
            _ => false,
        }
    }
}

/// AST of objective comparisons and subjective conditions combined with
/// fuzzy AND/OR/NOT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FuzzyExpr {
    Objective {
        attr: String,
        cmp: Comparator,
        value: AttrValue,
    },
    Subjective {
        attribute: String,
        phrase: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        marker: Option<String>,
    },
    And(Vec<FuzzyExpr>),
    Or(Vec<FuzzyExpr>),
    Not(Box<FuzzyExpr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InterpretMethod {
    #[serde(rename = "word2vec")]
    Word2Vec,
    #[serde(rename = "cooccurrence")]
    CoOccurrence,
    #[serde(rename = "text_retrieval")]
    TextRetrieval,
}

/// Result of translating a free-text predicate: either an expression over
/// attribute/marker conditions or a text-retrieval fallback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InterpretationBody {
    MarkerExpr(FuzzyExpr),
    TextFallback(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interpretation {
    pub body: InterpretationBody,
    pub confidence: f64,
    pub method: InterpretMethod,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Violation {
    pub message: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    fn push(&mut self, message: String) {
        self.violations.push(Violation { message });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{}", v.message)?;
        }
        Ok(())
    }
}

fn valid_iso_date(s: &str) -> bool {
    let bytes = s.as_bytes();
    if bytes.len() != 10 || bytes[4] != b'-' || bytes[7] != b'-' {
        return false;
    }
    let digits = |r: std::ops::Range<usize>| s[r].chars().all(|c| c.is_ascii_digit());
    if !digits(0..4) || !digits(5..7) || !digits(8..10) {
        return false;
    }
    let month: u32 = s[5..7].parse().unwrap_or(0);
    let day: u32 = s[8..10].parse().unwrap_or(0);
    (1..=12).contains(&month) && (1..=31).contains(&day)
}

/// Check the whole database for invariant violations: duplicate or dangling
/// keys, empty texts, undersized marker sets, embedding-dimension mismatches.
/// The report is empty iff the database is consistent.
pub fn validate_schema(
    schema: &[SubjectiveAttribute],
    entities: &[Entity],
    reviews: &[Review],
    extractions: &[ExtractionRecord],
) -> ValidationReport {
    let mut report = ValidationReport::default();

    let mut entity_ids = BTreeSet::new();
    for e in entities {
        if !entity_ids.insert(e.id.as_str()) {
            report.push(format!("duplicate entity id {:?}", e.id));
        }
    }

    let mut review_keys = BTreeSet::new();
    for r in reviews {
        if !review_keys.insert((r.entity_id.as_str(), r.review_id.as_str())) {
            report.push(format!(
                "duplicate review key ({:?}, {:?})",
                r.entity_id, r.review_id
            ));
        }
        if r.text.is_empty() {
            report.push(format!(
                "review ({:?}, {:?}) has empty text",
                r.entity_id, r.review_id
            ));
        }
        if !entity_ids.contains(r.entity_id.as_str()) {
            report.push(format!(
                "review ({:?}, {:?}) references missing entity",
                r.entity_id, r.review_id
            ));
        }
        if let Some(date) = &r.date {
            if !valid_iso_date(date) {
                report.push(format!(
                    "review ({:?}, {:?}) has malformed date {:?}",
                    r.entity_id, r.review_id, date
                ));
            }
        }
    }

    let attr_names: BTreeSet<&str> = schema.iter().map(|a| a.name.as_str()).collect();
    if attr_names.len() != schema.len() {
        report.push("duplicate attribute names in schema".into());
    }
    let dim = schema
        .iter()
        .flat_map(|a| a.markers.iter())
        .map(|m| m.embedding.len())
        .next();
    for attr in schema {
        if !attr.markers.is_empty() && attr.markers.len() < 2 {
            report.push(format!("attribute {:?}: markers < 2", attr.name));
        }
        let mut names = BTreeSet::new();
        for m in &attr.markers {
            if !names.insert(m.name.as_str()) {
                report.push(format!(
                    "attribute {:?}: duplicate marker {:?}",
                    attr.name, m.name
                ));
            }
            if let Some(dim) = dim {
                if m.embedding.len() != dim {
                    report.push(format!(
                        "attribute {:?}: marker {:?} embedding dimension {} != {}",
                        attr.name,
                        m.name,
                        m.embedding.len(),
                        dim
                    ));
                }
            }
            if !(-1.0..=1.0).contains(&m.sentiment) {
                report.push(format!(
                    "attribute {:?}: marker {:?} sentiment {} outside [-1, 1]",
                    attr.name, m.name, m.sentiment
                ));
            }
        }
        if attr.kind == AttributeKind::LinearlyOrdered {
            let sorted = attr
                .markers
                .windows(2)
                .all(|w| w[0].sentiment >= w[1].sentiment);
            if !sorted {
                report.push(format!(
                    "attribute {:?}: linearly-ordered markers not sorted by descending sentiment",
                    attr.name
                ));
            }
        }
        if attr.seeds.aspects.is_empty() || attr.seeds.opinions.is_empty() {
            report.push(format!("attribute {:?}: empty seed set", attr.name));
        }
    }

    for (i, x) in extractions.iter().enumerate() {
        if x.aspect_term.trim().is_empty() || x.opinion_term.trim().is_empty() {
            report.push(format!(
                "extraction #{i} ({:?}, {:?}): empty aspect or opinion term",
                x.entity_id, x.review_id
            ));
        }
        if !review_keys.contains(&(x.entity_id.as_str(), x.review_id.as_str())) {
            report.push(format!(
                "extraction #{i} ({:?}, {:?}, {:?}) references missing review",
                x.entity_id, x.review_id, x.phrase()
            ));
        }
        if let Some(attr) = &x.attribute {
            if !attr_names.contains(attr.as_str()) {
                report.push(format!(
                    "extraction #{i} references unknown attribute {:?}",
                    attr
                ));
            }
        }
    }

    report
}

/// Read a JSONL file: UTF-8, one object per line. Parse failures carry the
/// file path and 1-based line number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: T = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        writeln!(out)?;
    }
    Ok(())
}
