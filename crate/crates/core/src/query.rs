//! The query dialect and its evaluation: a single select-from-where grammar
//! whose where clause mixes objective comparisons with quoted free-text
//! predicates, combined per entity under fuzzy semantics into a ranked
//! result.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::db::Database;
use crate::error::{Error, Result};
use crate::model::{
    AttrValue, Comparator, FuzzyExpr, Interpretation, InterpretationBody,
};

/// Fuzzy-logic operator family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// AND = product, OR = probabilistic sum, NOT = complement.
    Product,
    /// AND = min, OR = max, NOT = complement.
    MinMax,
}

fn check_unit(x: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(Error::FuzzyDomain(x))
    }
}

pub fn fuzzy_and(variant: Variant, x: f64, y: f64) -> Result<f64> {
    let (x, y) = (check_unit(x)?, check_unit(y)?);
    Ok(match variant {
        Variant::Product => x * y,
        Variant::MinMax => x.min(y),
    })
}

pub fn fuzzy_or(variant: Variant, x: f64, y: f64) -> Result<f64> {
    let (x, y) = (check_unit(x)?, check_unit(y)?);
    Ok(match variant {
        Variant::Product => 1.0 - (1.0 - x) * (1.0 - y),
        Variant::MinMax => x.max(y),
    })
}

pub fn fuzzy_not(x: f64) -> Result<f64> {
    Ok(1.0 - check_unit(x)?)
}

/// Where-clause tree as parsed: objective comparisons, quoted natural
/// language predicates, and the three connectives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WhereExpr {
    Objective {
        attr: String,
        cmp: Comparator,
        value: AttrValue,
    },
    Predicate(String),
    And(Vec<WhereExpr>),
    Or(Vec<WhereExpr>),
    Not(Box<WhereExpr>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectiveQuery {
    pub relation: String,
    pub where_clause: Option<WhereExpr>,
}

impl SubjectiveQuery {
    /// All quoted predicates, left to right, duplicates removed.
    pub fn predicates(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(expr) = &self.where_clause {
            collect_predicates(expr, &mut out);
        }
        out.dedup();
        let mut seen = std::collections::BTreeSet::new();
        out.retain(|p| seen.insert(p.clone()));
        out
    }

    /// Build a pure conjunction of free-text predicates over `relation`.
    pub fn conjunction(relation: &str, predicates: &[String]) -> Self {
        let leaves: Vec<WhereExpr> = predicates
            .iter()
            .map(|p| WhereExpr::Predicate(p.clone()))
            .collect();
        let where_clause = match leaves.len() {
            0 => None,
            1 => Some(leaves.into_iter().next().unwrap()),
            _ => Some(WhereExpr::And(leaves)),
        };
        SubjectiveQuery {
            relation: relation.to_string(),
            where_clause,
        }
    }
}

fn collect_predicates(expr: &WhereExpr, out: &mut Vec<String>) {
    match expr {
        WhereExpr::Predicate(p) => out.push(p.clone()),
        WhereExpr::Objective { .. } => {}
        WhereExpr::And(children) | WhereExpr::Or(children) => {
            for c in children {
                collect_predicates(c, out);
            }
        }
        WhereExpr::Not(child) => collect_predicates(child, out),
    }
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Select,
    From,
    Where,
    And,
    Or,
    Not,
    Star,
    LParen,
    RParen,
    Ident(String),
    Number(f64),
    Str(String),
    Quoted(String),
    Cmp(Comparator),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Select => write!(f, "`select`"),
            Tok::From => write!(f, "`from`"),
            Tok::Where => write!(f, "`where`"),
            Tok::And => write!(f, "`and`"),
            Tok::Or => write!(f, "`or`"),
            Tok::Not => write!(f, "`not`"),
            Tok::Star => write!(f, "`*`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::Ident(s) => write!(f, "identifier {s:?}"),
            Tok::Number(n) => write!(f, "number {n}"),
            Tok::Str(s) => write!(f, "string {s:?}"),
            Tok::Quoted(s) => write!(f, "predicate {s:?}"),
            Tok::Cmp(c) => write!(f, "`{c}`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

struct Lexer<'a> {
    chars: Vec<(usize, char)>,
    pos: usize,
    text: &'a str,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            chars: text.char_indices().collect(),
            pos: 0,
            text,
        }
    }

    fn peek_char(&self) -> Option<(usize, char)> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<(usize, char)> {
        let c = self.peek_char();
        self.pos += 1;
        c
    }

    fn error(&self, at: usize, expected: &str, found: String) -> Error {
        Error::Syntax {
            position: at,
            expected: expected.to_string(),
            found,
        }
    }

    fn next_token(&mut self) -> Result<(usize, Tok)> {
        while let Some((_, c)) = self.peek_char() {
            if c.is_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
        let Some((at, c)) = self.peek_char() else {
            return Ok((self.text.len(), Tok::Eof));
        };
        match c {
            '*' => {
                self.pos += 1;
                Ok((at, Tok::Star))
            }
            '(' => {
                self.pos += 1;
                Ok((at, Tok::LParen))
            }
            ')' => {
                self.pos += 1;
                Ok((at, Tok::RParen))
            }
            '<' => {
                self.pos += 1;
                if let Some((_, '=')) = self.peek_char() {
                    self.pos += 1;
                    Ok((at, Tok::Cmp(Comparator::Le)))
                } else {
                    Ok((at, Tok::Cmp(Comparator::Lt)))
                }
            }
            '>' => {
                self.pos += 1;
                if let Some((_, '=')) = self.peek_char() {
                    self.pos += 1;
                    Ok((at, Tok::Cmp(Comparator::Ge)))
                } else {
                    Ok((at, Tok::Cmp(Comparator::Gt)))
                }
            }
            '=' => {
                self.pos += 1;
                Ok((at, Tok::Cmp(Comparator::Eq)))
            }
            '!' => {
                self.bump();
                match self.bump() {
                    Some((_, '=')) => Ok((at, Tok::Cmp(Comparator::Ne))),
                    other => Err(self.error(
                        at,
                        "`!=`",
                        other.map_or("end of input".into(), |(_, c)| format!("{c:?}")),
                    )),
                }
            }
            '"' => {
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        Some((_, '"')) => break,
                        Some((_, c)) => s.push(c),
                        None => {
                            return Err(self.error(at, "closing `\"`", "end of input".into()))
                        }
                    }
                }
                if s.trim().is_empty() {
                    return Err(self.error(at, "non-empty predicate", "empty string".into()));
                }
                Ok((at, Tok::Quoted(s)))
            }
            '\'' => {
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        Some((_, '\'')) => break,
                        Some((_, c)) => s.push(c),
                        None => {
                            return Err(self.error(at, "closing `'`", "end of input".into()))
                        }
                    }
                }
                Ok((at, Tok::Str(s)))
            }
            c if c.is_ascii_digit()
                || (c == '-'
                    && self
                        .chars
                        .get(self.pos + 1)
                        .is_some_and(|(_, n)| n.is_ascii_digit())) =>
            {
                let start = self.pos;
                self.pos += 1;
                while let Some((_, c)) = self.peek_char() {
                    if c.is_ascii_digit() || c == '.' {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                let end = self
                    .chars
                    .get(self.pos)
                    .map_or(self.text.len(), |(i, _)| *i);
                let slice = &self.text[self.chars[start].0..end];
                let n: f64 = slice
                    .parse()
                    .map_err(|_| self.error(at, "number", format!("{slice:?}")))?;
                Ok((at, Tok::Number(n)))
            }
            c if c.is_alphanumeric() || c == '_' => {
                let start = self.pos;
                self.pos += 1;
                while let Some((_, c)) = self.peek_char() {
                    if c.is_alphanumeric() || c == '_' {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                let end = self
                    .chars
                    .get(self.pos)
                    .map_or(self.text.len(), |(i, _)| *i);
                let word = &self.text[self.chars[start].0..end];
                let tok = match word.to_ascii_lowercase().as_str() {
                    "select" => Tok::Select,
                    "from" => Tok::From,
                    "where" => Tok::Where,
                    "and" => Tok::And,
                    "or" => Tok::Or,
                    "not" => Tok::Not,
                    _ => Tok::Ident(word.to_string()),
                };
                Ok((at, tok))
            }
            other => Err(self.error(at, "a token", format!("{other:?}"))),
        }
    }
}

// ---------------------------------------------------------------------------
// Parser

struct Parser {
    tokens: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &(usize, Tok) {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn bump(&mut self) -> (usize, Tok) {
        let t = self.tokens[self.pos.min(self.tokens.len() - 1)].clone();
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: &Tok, expected: &str) -> Result<()> {
        let (at, tok) = self.bump();
        if std::mem::discriminant(&tok) == std::mem::discriminant(want) {
            Ok(())
        } else {
            Err(Error::Syntax {
                position: at,
                expected: expected.to_string(),
                found: tok.to_string(),
            })
        }
    }

    fn parse_query(&mut self) -> Result<SubjectiveQuery> {
        self.expect(&Tok::Select, "`select`")?;
        self.expect(&Tok::Star, "`*`")?;
        self.expect(&Tok::From, "`from`")?;
        let (at, tok) = self.bump();
        let relation = match tok {
            Tok::Ident(name) => name,
            other => {
                return Err(Error::Syntax {
                    position: at,
                    expected: "relation name".into(),
                    found: other.to_string(),
                })
            }
        };
        let where_clause = match self.peek().1 {
            Tok::Where => {
                self.bump();
                Some(self.parse_or()?)
            }
            _ => None,
        };
        let (at, tok) = self.bump();
        if tok != Tok::Eof {
            return Err(Error::Syntax {
                position: at,
                expected: "end of input".into(),
                found: tok.to_string(),
            });
        }
        Ok(SubjectiveQuery {
            relation,
            where_clause,
        })
    }

    fn parse_or(&mut self) -> Result<WhereExpr> {
        let mut children = vec![self.parse_and()?];
        while self.peek().1 == Tok::Or {
            self.bump();
            children.push(self.parse_and()?);
        }
        Ok(if children.len() == 1 {
            children.pop().unwrap()
        } else {
            WhereExpr::Or(children)
        })
    }

    fn parse_and(&mut self) -> Result<WhereExpr> {
        let mut children = vec![self.parse_unary()?];
        while self.peek().1 == Tok::And {
            self.bump();
            children.push(self.parse_unary()?);
        }
        Ok(if children.len() == 1 {
            children.pop().unwrap()
        } else {
            WhereExpr::And(children)
        })
    }

    fn parse_unary(&mut self) -> Result<WhereExpr> {
        if self.peek().1 == Tok::Not {
            self.bump();
            return Ok(WhereExpr::Not(Box::new(self.parse_unary()?)));
        }
        self.parse_primary()
    }

    fn parse_primary(&mut self) -> Result<WhereExpr> {
        let (at, tok) = self.bump();
        match tok {
            Tok::LParen => {
                let inner = self.parse_or()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Quoted(p) => Ok(WhereExpr::Predicate(p)),
            Tok::Ident(attr) => {
                let (at, tok) = self.bump();
                let cmp = match tok {
                    Tok::Cmp(c) => c,
                    other => {
                        return Err(Error::Syntax {
                            position: at,
                            expected: "comparison operator".into(),
                            found: other.to_string(),
                        })
                    }
                };
                let (at, tok) = self.bump();
                let value = match tok {
                    Tok::Number(n) => AttrValue::Number(n),
                    Tok::Str(s) => AttrValue::Text(s),
                    other => {
                        return Err(Error::Syntax {
                            position: at,
                            expected: "number or quoted string literal".into(),
                            found: other.to_string(),
                        })
                    }
                };
                Ok(WhereExpr::Objective { attr, cmp, value })
            }
            other => Err(Error::Syntax {
                position: at,
                expected: "condition (`attr <cmp> literal`, \"predicate\", `not`, or `(`)".into(),
                found: other.to_string(),
            }),
        }
    }
}

/// Parse the dialect: `select * from <ident> [where <expr>]` with
/// case-insensitive keywords; AND binds tighter than OR; NOT and parentheses
/// as usual. Atomic conditions are `<ident> <cmp> <literal>` comparisons and
/// double-quoted free-text predicates.
pub fn parse(query_text: &str) -> Result<SubjectiveQuery> {
    let mut lexer = Lexer::new(query_text);
    let mut tokens = Vec::new();
    loop {
        let (at, tok) = lexer.next_token()?;
        let done = tok == Tok::Eof;
        tokens.push((at, tok));
        if done {
            break;
        }
    }
    Parser { tokens, pos: 0 }.parse_query()
}

// ---------------------------------------------------------------------------
// Evaluation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionDegree {
    pub label: String,
    pub degree: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedRow {
    pub entity_id: String,
    pub degree: f64,
    pub per_condition: Vec<ConditionDegree>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedResult {
    pub rows: Vec<RankedRow>,
    pub k: usize,
    /// Provenance: predicate → interpretation used during evaluation.
    pub interpretations: BTreeMap<String, Interpretation>,
}

fn condition_label(expr: &WhereExpr) -> Option<String> {
    match expr {
        WhereExpr::Objective { attr, cmp, value } => Some(format!("{attr} {cmp} {value}")),
        WhereExpr::Predicate(p) => Some(p.clone()),
        _ => None,
    }
}

fn collect_condition_labels(expr: &WhereExpr, out: &mut Vec<(String, WhereExpr)>) {
    match expr {
        WhereExpr::And(children) | WhereExpr::Or(children) => {
            for c in children {
                collect_condition_labels(c, out);
            }
        }
        WhereExpr::Not(child) => collect_condition_labels(child, out),
        leaf => {
            if let Some(label) = condition_label(leaf) {
                out.push((label, leaf.clone()));
            }
        }
    }
}

struct EvalCtx<'a> {
    db: &'a Database,
    variant: Variant,
    interpretations: BTreeMap<String, Interpretation>,
    /// Per-predicate sigmoid offset for text fallbacks.
    fallback_c: BTreeMap<String, f64>,
    /// Per-predicate degree binarization thresholds (hard semantics only).
    hard: Option<BTreeMap<String, f64>>,
}

impl<'a> EvalCtx<'a> {
    fn objective_degree(&self, entity_idx: usize, attr: &str, cmp: Comparator, value: &AttrValue) -> f64 {
        let entity = &self.db.entities[entity_idx];
        let Some(actual) = entity.objective_attrs.get(attr) else { return 0.0 };
        let holds = match (actual, value) {
            (AttrValue::Number(a), AttrValue::Number(b)) => cmp.eval_number(*a, *b),
            (AttrValue::Text(a), AttrValue::Text(b)) => cmp.eval_text(a, b),
            _ => false,
        };
        f64::from(holds)
    }

    fn marker_expr_degree(&self, entity_id: &str, expr: &FuzzyExpr) -> Result<f64> {
        match expr {
            FuzzyExpr::Subjective {
                attribute,
                phrase,
                marker,
            } => self.db.subjective_degree(entity_id, attribute, phrase, marker.as_deref()),
            FuzzyExpr::And(children) => {
                let mut acc = 1.0;
                for (i, child) in children.iter().enumerate() {
                    let d = self.marker_expr_degree(entity_id, child)?;
                    acc = if i == 0 { d } else { fuzzy_and(self.variant, acc, d)? };
                }
                Ok(acc)
            }
            FuzzyExpr::Or(children) => {
                let mut acc = 0.0;
                for (i, child) in children.iter().enumerate() {
                    let d = self.marker_expr_degree(entity_id, child)?;
                    acc = if i == 0 { d } else { fuzzy_or(self.variant, acc, d)? };
                }
                Ok(acc)
            }
            FuzzyExpr::Not(child) => fuzzy_not(self.marker_expr_degree(entity_id, child)?),
            FuzzyExpr::Objective { .. } => {
                // interpretations never produce objective leaves
                Ok(0.0)
            }
        }
    }

    /// Degree of one NL predicate for one entity, before any hard
    /// binarization.
    fn predicate_degree(&self, entity_idx: usize, predicate: &str) -> Result<f64> {
        let entity_id = self.db.entities[entity_idx].id.as_str();
        let interp = &self.interpretations[predicate];
        match &interp.body {
            InterpretationBody::MarkerExpr(expr) => self.marker_expr_degree(entity_id, expr),
            InterpretationBody::TextFallback(text) => {
                let c = self.fallback_c[predicate];
                self.db.fallback_degree(entity_id, text, c)
            }
        }
    }

    fn eval(&self, entity_idx: usize, expr: &WhereExpr) -> Result<f64> {
        match expr {
            WhereExpr::Objective { attr, cmp, value } => {
                Ok(self.objective_degree(entity_idx, attr, *cmp, value))
            }
            WhereExpr::Predicate(p) => {
                let degree = self.predicate_degree(entity_idx, p)?;
                match &self.hard {
                    Some(thresholds) => {
                        let threshold = thresholds.get(p).copied().unwrap_or(0.0);
                        Ok(f64::from(degree > threshold))
                    }
                    None => Ok(degree),
                }
            }
            WhereExpr::And(children) => {
                let mut acc = 1.0;
                for (i, child) in children.iter().enumerate() {
                    let d = self.eval(entity_idx, child)?;
                    acc = if i == 0 { d } else { fuzzy_and(self.variant, acc, d)? };
                }
                Ok(acc)
            }
            WhereExpr::Or(children) => {
                let mut acc = 0.0;
                for (i, child) in children.iter().enumerate() {
                    let d = self.eval(entity_idx, child)?;
                    acc = if i == 0 { d } else { fuzzy_or(self.variant, acc, d)? };
                }
                Ok(acc)
            }
            WhereExpr::Not(child) => fuzzy_not(self.eval(entity_idx, child)?),
        }
    }
}

fn prepare<'a>(
    db: &'a Database,
    query: &SubjectiveQuery,
    hard: Option<&BTreeMap<String, f64>>,
    default_hard_threshold: f64,
    variant: Variant,
) -> Result<EvalCtx<'a>> {
    if !query.relation.eq_ignore_ascii_case(&db.config.relation) {
        return Err(Error::UnknownRelation(query.relation.clone()));
    }
    // objective attributes must exist somewhere in the database
    if let Some(expr) = &query.where_clause {
        let mut leaves = Vec::new();
        collect_condition_labels(expr, &mut leaves);
        for (_, leaf) in &leaves {
            if let WhereExpr::Objective { attr, .. } = leaf {
                let known = db
                    .entities
                    .iter()
                    .any(|e| e.objective_attrs.contains_key(attr));
                if !known {
                    return Err(Error::UnknownObjectiveAttribute(attr.clone()));
                }
            }
        }
    }
    let predicates = query.predicates();
    let mut interpretations = BTreeMap::new();
    let mut fallback_c = BTreeMap::new();
    for p in &predicates {
        let interp = db.interpret_cached(p);
        if matches!(interp.body, InterpretationBody::TextFallback(_)) {
            fallback_c.insert(p.clone(), db.resolve_sigmoid_c(p));
        }
        interpretations.insert(p.clone(), interp);
    }
    let hard = hard.map(|overrides| {
        predicates
            .iter()
            .map(|p| {
                (
                    p.clone(),
                    overrides.get(p).copied().unwrap_or(default_hard_threshold),
                )
            })
            .collect()
    });
    Ok(EvalCtx {
        db,
        variant,
        interpretations,
        fallback_c,
        hard,
    })
}

fn rank(ctx: &EvalCtx, query: &SubjectiveQuery, k: usize, keep_only_full: bool) -> Result<RankedResult> {
    let mut labels = Vec::new();
    if let Some(expr) = &query.where_clause {
        collect_condition_labels(expr, &mut labels);
    }
    let mut rows = Vec::with_capacity(ctx.db.entities.len());
    for (idx, entity) in ctx.db.entities.iter().enumerate() {
        let degree = match &query.where_clause {
            Some(expr) => ctx.eval(idx, expr)?,
            None => 1.0,
        };
        if keep_only_full && degree < 1.0 {
            continue;
        }
        let mut per_condition = Vec::with_capacity(labels.len());
        for (label, leaf) in &labels {
            let d = match leaf {
                WhereExpr::Objective { attr, cmp, value } => {
                    ctx.objective_degree(idx, attr, *cmp, value)
                }
                WhereExpr::Predicate(p) => ctx.predicate_degree(idx, p)?,
                _ => unreachable!("labels are leaves"),
            };
            per_condition.push(ConditionDegree {
                label: label.clone(),
                degree: d,
            });
        }
        rows.push(RankedRow {
            entity_id: entity.id.clone(),
            degree,
            per_condition,
        });
    }
    rows.sort_by(|a, b| {
        b.degree
            .total_cmp(&a.degree)
            .then_with(|| a.entity_id.cmp(&b.entity_id))
    });
    rows.truncate(k);
    Ok(RankedResult {
        rows,
        k,
        interpretations: ctx.interpretations.clone(),
    })
}

/// Fuzzy evaluation: every NL predicate is interpreted once (through the
/// shared cache), objective leaves contribute exactly 0 or 1, subjective
/// leaves evaluate through the membership models (or the zero-evidence
/// prior), text fallbacks through the retrieval sigmoid, all combined under
/// `variant`. Returns the top-k entities by degree, ties by entity id.
pub fn evaluate(
    db: &Database,
    query: &SubjectiveQuery,
    k: usize,
    variant: Variant,
) -> Result<RankedResult> {
    let ctx = prepare(db, query, None, 0.0, variant)?;
    rank(&ctx, query, k, false)
}

/// Hard-constraint semantics: each NL predicate is binarized against its
/// threshold (true iff degree strictly exceeds it) and the where clause is
/// evaluated as boolean logic. Only entities satisfying the whole clause are
/// returned, ranked by their (unbinarized) fuzzy degree.
pub fn evaluate_hard(
    db: &Database,
    query: &SubjectiveQuery,
    thresholds: &BTreeMap<String, f64>,
    default_threshold: f64,
    k: usize,
    variant: Variant,
) -> Result<RankedResult> {
    let hard_ctx = prepare(db, query, Some(thresholds), default_threshold, variant)?;
    let fuzzy_ctx = prepare(db, query, None, 0.0, variant)?;
    // admit entities whose binarized clause evaluates to true
    let mut admitted = Vec::new();
    for idx in 0..db.entities.len() {
        let holds = match &query.where_clause {
            Some(expr) => hard_ctx.eval(idx, expr)? == 1.0,
            None => true,
        };
        if holds {
            admitted.push(idx);
        }
    }
    let full = rank(&fuzzy_ctx, query, usize::MAX, false)?;
    let admitted_ids: std::collections::BTreeSet<&str> = admitted
        .iter()
        .map(|&i| db.entities[i].id.as_str())
        .collect();
    let mut rows: Vec<RankedRow> = full
        .rows
        .into_iter()
        .filter(|r| admitted_ids.contains(r.entity_id.as_str()))
        .collect();
    rows.truncate(k);
    Ok(RankedResult {
        rows,
        k,
        interpretations: full.interpretations,
    })
}
