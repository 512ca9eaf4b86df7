//! Free-text predicate interpretation. A predicate is matched against the
//! schema through a three-stage fallback chain: embedding similarity over the
//! indexed linguistic domains, co-occurrence mining over the review corpus,
//! and finally plain text retrieval. Also hosts the budget-constrained
//! rewriter-selection optimizer.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    ExtractionRecord, FuzzyExpr, Interpretation, InterpretationBody, InterpretMethod,
    SubjectiveAttribute,
};
use crate::retrieval::{review_doc_id, InvertedIndex};
use crate::text::{cosine, normalize, rep, tokenize, EmbeddingTable, IdfTable, SentimentLexicon};

/// Which lookup path produced an embedding-method match.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LookupPath {
    /// The predicate is itself an indexed phrase.
    Exact,
    /// A one-word substitution produced an indexed phrase; no scan ran.
    Substitution,
    /// Full similarity scan over every indexed phrase.
    Scan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct W2vMatch {
    pub attribute: String,
    pub marker: String,
    pub matched_phrase: String,
    pub similarity: f64,
    pub path: LookupPath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct VariationEntry {
    attribute: String,
    marker: String,
    rep: Vec<f64>,
}

/// Index over every linguistic-domain phrase of every attribute: phrase →
/// (attribute, nearest marker, representation), plus a per-token
/// nearest-neighbor substitution table for the one-word-rewrite fast path.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VariationIndex {
    entries: BTreeMap<String, VariationEntry>,
    /// token → nearest other indexed token by Euclidean distance between
    /// idf-weighted embedding vectors.
    substitution: BTreeMap<String, String>,
}

impl VariationIndex {
    /// `domains` maps attribute name → its distinct linguistic-domain
    /// phrases. Phrases claimed by several attributes keep the first by
    /// attribute-name order.
    pub fn build(
        domains: &BTreeMap<String, Vec<String>>,
        attributes: &[SubjectiveAttribute],
        emb: &EmbeddingTable,
        idf: &IdfTable,
    ) -> Self {
        let by_name: BTreeMap<&str, &SubjectiveAttribute> =
            attributes.iter().map(|a| (a.name.as_str(), a)).collect();
        let mut entries: BTreeMap<String, VariationEntry> = BTreeMap::new();
        for (attr_name, phrases) in domains {
            let Some(attribute) = by_name.get(attr_name.as_str()) else { continue };
            if attribute.markers.is_empty() {
                continue;
            }
            for phrase in phrases {
                let key = normalize(phrase);
                if entries.contains_key(&key) {
                    continue;
                }
                let Ok(phrase_rep) = rep(&key, emb, idf) else { continue };
                let marker = attribute
                    .markers
                    .iter()
                    .max_by(|a, b| {
                        cosine(&phrase_rep, &a.embedding)
                            .total_cmp(&cosine(&phrase_rep, &b.embedding))
                    })
                    .unwrap();
                entries.insert(
                    key,
                    VariationEntry {
                        attribute: attr_name.clone(),
                        marker: marker.name.clone(),
                        rep: phrase_rep,
                    },
                );
            }
        }

        // substitution neighbors over the tokens of indexed phrases
        let mut tokens: BTreeSet<String> = BTreeSet::new();
        for phrase in entries.keys() {
            for token in tokenize(phrase) {
                if emb.contains(&token) {
                    tokens.insert(token);
                }
            }
        }
        let weighted: BTreeMap<&str, Vec<f64>> = tokens
            .iter()
            .map(|t| {
                let w = idf.idf(t);
                let v: Vec<f64> = emb.get(t).unwrap().iter().map(|x| x * w).collect();
                (t.as_str(), v)
            })
            .collect();
        let mut substitution = BTreeMap::new();
        for (token, vector) in &weighted {
            let mut best: Option<(&str, f64)> = None;
            for (other, other_vec) in &weighted {
                if other == token {
                    continue;
                }
                let dist: f64 = vector
                    .iter()
                    .zip(other_vec)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                match best {
                    Some((_, d)) if d <= dist => {}
                    _ => best = Some((other, dist)),
                }
            }
            if let Some((neighbor, _)) = best {
                substitution.insert(token.to_string(), neighbor.to_string());
            }
        }
        VariationIndex {
            entries,
            substitution,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains_phrase(&self, phrase: &str) -> bool {
        self.entries.contains_key(&normalize(phrase))
    }

    pub fn substitution_of(&self, token: &str) -> Option<&str> {
        self.substitution.get(token).map(|s| s.as_str())
    }

    #[cfg(test)]
    pub(crate) fn clear_substitutions(&mut self) {
        self.substitution.clear();
    }
}

/// Embedding-similarity interpretation. Lookup runs in three steps: exact
/// phrase hit, one-word substitutions checked against the phrase set, then an
/// exhaustive similarity scan. Returns None when the best similarity falls
/// below `threshold` or the predicate has no in-vocabulary token.
pub fn interpret_w2v(
    predicate: &str,
    vindex: &VariationIndex,
    emb: &EmbeddingTable,
    idf: &IdfTable,
    threshold: f64,
) -> Option<W2vMatch> {
    let key = normalize(predicate);
    if key.is_empty() {
        return None;
    }
    if let Some(entry) = vindex.entries.get(&key) {
        return Some(W2vMatch {
            attribute: entry.attribute.clone(),
            marker: entry.marker.clone(),
            matched_phrase: key,
            similarity: 1.0,
            path: LookupPath::Exact,
        });
    }
    let query_rep = rep(&key, emb, idf).ok()?;

    // one-word substitutions; every hit is scored and the best one wins
    let tokens = tokenize(&key);
    let mut best_hit: Option<(String, &VariationEntry, f64)> = None;
    for (i, token) in tokens.iter().enumerate() {
        let Some(neighbor) = vindex.substitution.get(token) else { continue };
        let mut candidate = tokens.clone();
        candidate[i] = neighbor.clone();
        let candidate = candidate.join(" ");
        let Some(entry) = vindex.entries.get(&candidate) else { continue };
        let sim = cosine(&query_rep, &entry.rep);
        let better = match &best_hit {
            Some((phrase, _, s)) => sim > *s || (sim == *s && candidate < *phrase),
            None => true,
        };
        if better {
            best_hit = Some((candidate, entry, sim));
        }
    }
    if let Some((phrase, entry, sim)) = best_hit {
        if sim >= threshold {
            return Some(W2vMatch {
                attribute: entry.attribute.clone(),
                marker: entry.marker.clone(),
                matched_phrase: phrase,
                similarity: sim,
                path: LookupPath::Substitution,
            });
        }
    }

    // exhaustive scan
    let mut best: Option<(&String, &VariationEntry, f64)> = None;
    for (phrase, entry) in &vindex.entries {
        let sim = cosine(&query_rep, &entry.rep);
        let better = match &best {
            Some((p, _, s)) => sim > *s || (sim == *s && phrase < *p),
            None => true,
        };
        if better {
            best = Some((phrase, entry, sim));
        }
    }
    let (phrase, entry, sim) = best?;
    if sim >= threshold {
        Some(W2vMatch {
            attribute: entry.attribute.clone(),
            marker: entry.marker.clone(),
            matched_phrase: phrase.clone(),
            similarity: sim,
            path: LookupPath::Scan,
        })
    } else {
        None
    }
}

/// Extraction statistics the co-occurrence method needs: which classified
/// phrases occur in which review, and per-attribute review frequencies.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CoocStats {
    /// review doc id → (attribute, canonical phrase) pairs.
    by_review: BTreeMap<String, Vec<(String, String)>>,
    /// attribute → number of reviews containing at least one extraction of it.
    attr_review_df: BTreeMap<String, usize>,
    review_count: usize,
}

impl CoocStats {
    pub fn build(extractions: &[ExtractionRecord], review_count: usize) -> Self {
        let mut by_review: BTreeMap<String, Vec<(String, String)>> = BTreeMap::new();
        for record in extractions {
            let Some(attr) = &record.attribute else { continue };
            by_review
                .entry(review_doc_id(&record.entity_id, &record.review_id))
                .or_default()
                .push((attr.clone(), record.phrase()));
        }
        let mut attr_review_df: BTreeMap<String, usize> = BTreeMap::new();
        for pairs in by_review.values() {
            let attrs: BTreeSet<&str> = pairs.iter().map(|(a, _)| a.as_str()).collect();
            for attr in attrs {
                *attr_review_df.entry(attr.to_string()).or_insert(0) += 1;
            }
        }
        CoocStats {
            by_review,
            attr_review_df,
            review_count,
        }
    }

    /// Smoothed attribute idf over reviews, same shape as token idf.
    pub fn attr_idf(&self, attribute: &str) -> f64 {
        let df = self.attr_review_df.get(attribute).copied().unwrap_or(0);
        ((self.review_count as f64 + 1.0) / (df as f64 + 1.0)).ln() + 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoocConfig {
    /// How many sentiment-weighted reviews to retrieve.
    pub k: usize,
    /// How many attributes the interpretation combines.
    pub n: usize,
    /// Fraction of the top-k reviews that must mention all selected
    /// attributes together for the combination to become a conjunction.
    pub conj_threshold: f64,
    /// Minimum freq·idf score of the n-th attribute; below it the method
    /// reports no confident interpretation.
    pub score_threshold: f64,
}

impl Default for CoocConfig {
    fn default() -> Self {
        Self {
            k: 50,
            n: 2,
            conj_threshold: 0.5,
            score_threshold: 3.0,
        }
    }
}

/// Co-occurrence interpretation: retrieve the top-k positive reviews for the
/// predicate, rank attributes by extraction frequency times attribute idf,
/// and map each selected attribute to its most frequent marker among those
/// reviews. Attributes combine with OR, or with AND when they co-occur in at
/// least `conj_threshold` of the retrieved reviews.
#[allow(clippy::too_many_arguments)]
pub fn interpret_cooccurrence(
    predicate: &str,
    review_index: &InvertedIndex,
    stats: &CoocStats,
    attributes: &[SubjectiveAttribute],
    emb: &EmbeddingTable,
    idf: &IdfTable,
    lex: &SentimentLexicon,
    config: &CoocConfig,
) -> Option<Interpretation> {
    let top = review_index.top_k_reviews(predicate, config.k, lex);
    if top.is_empty() {
        return None;
    }
    let by_name: BTreeMap<&str, &SubjectiveAttribute> =
        attributes.iter().map(|a| (a.name.as_str(), a)).collect();

    let mut freq: BTreeMap<&str, u64> = BTreeMap::new();
    for (doc_id, _) in &top {
        if let Some(pairs) = stats.by_review.get(doc_id) {
            for (attr, _) in pairs {
                *freq.entry(attr.as_str()).or_insert(0) += 1;
            }
        }
    }
    let mut scored: Vec<(&str, f64)> = freq
        .iter()
        .map(|(attr, count)| (*attr, *count as f64 * stats.attr_idf(attr)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    if scored.len() < config.n || scored[config.n - 1].1 < config.score_threshold {
        return None;
    }
    let selected: Vec<&str> = scored[..config.n].iter().map(|(a, _)| *a).collect();

    // most frequent marker per selected attribute within the top-k reviews
    let mut leaves = Vec::with_capacity(selected.len());
    for attr_name in &selected {
        let attribute = by_name.get(attr_name)?;
        if attribute.markers.is_empty() {
            return None;
        }
        let mut marker_counts = vec![0u64; attribute.markers.len()];
        for (doc_id, _) in &top {
            let Some(pairs) = stats.by_review.get(doc_id) else { continue };
            for (attr, phrase) in pairs {
                if attr != attr_name {
                    continue;
                }
                let Ok(phrase_rep) = rep(phrase, emb, idf) else { continue };
                let mut best = 0;
                let mut best_sim = f64::NEG_INFINITY;
                for (i, marker) in attribute.markers.iter().enumerate() {
                    let sim = cosine(&phrase_rep, &marker.embedding);
                    if sim > best_sim {
                        best_sim = sim;
                        best = i;
                    }
                }
                marker_counts[best] += 1;
            }
        }
        // argmax count, earlier marker wins ties
        let mut best_marker = 0;
        for (i, count) in marker_counts.iter().enumerate() {
            if *count > marker_counts[best_marker] {
                best_marker = i;
            }
        }
        leaves.push(FuzzyExpr::Subjective {
            attribute: attr_name.to_string(),
            phrase: predicate.to_string(),
            marker: Some(attribute.markers[best_marker].name.clone()),
        });
    }

    let expr = if leaves.len() == 1 {
        leaves.into_iter().next().unwrap()
    } else {
        // conjunction when the selected attributes co-occur in enough of the
        // retrieved reviews, disjunction otherwise
        let together = top
            .iter()
            .filter(|(doc_id, _)| {
                let Some(pairs) = stats.by_review.get(doc_id) else { return false };
                let present: BTreeSet<&str> = pairs.iter().map(|(a, _)| a.as_str()).collect();
                selected.iter().all(|a| present.contains(a))
            })
            .count();
        if together as f64 / top.len() as f64 >= config.conj_threshold {
            FuzzyExpr::And(leaves)
        } else {
            FuzzyExpr::Or(leaves)
        }
    };
    let confidence = (scored[0].1 / config.k as f64).clamp(0.0, 1.0);
    Some(Interpretation {
        body: InterpretationBody::MarkerExpr(expr),
        confidence,
        method: InterpretMethod::CoOccurrence,
    })
}

/// Everything `interpret` needs, borrowed from the built database.
pub struct InterpreterContext<'a> {
    pub vindex: &'a VariationIndex,
    pub review_index: &'a InvertedIndex,
    pub stats: &'a CoocStats,
    pub attributes: &'a [SubjectiveAttribute],
    pub emb: &'a EmbeddingTable,
    pub idf: &'a IdfTable,
    pub lex: &'a SentimentLexicon,
    pub w2v_threshold: f64,
    pub cooc: CoocConfig,
}

impl<'a> InterpreterContext<'a> {
    /// Total three-stage interpretation: embedding match, co-occurrence,
    /// then text-retrieval fallback. Never fails.
    pub fn interpret(&self, predicate: &str) -> Interpretation {
        self.interpret_with_path(predicate).0
    }

    /// As `interpret`, also reporting which embedding lookup path ran (None
    /// when the embedding stage produced no match).
    pub fn interpret_with_path(&self, predicate: &str) -> (Interpretation, Option<LookupPath>) {
        if let Some(m) = interpret_w2v(
            predicate,
            self.vindex,
            self.emb,
            self.idf,
            self.w2v_threshold,
        ) {
            let interp = Interpretation {
                body: InterpretationBody::MarkerExpr(FuzzyExpr::Subjective {
                    attribute: m.attribute,
                    phrase: predicate.to_string(),
                    marker: Some(m.marker),
                }),
                confidence: m.similarity.clamp(0.0, 1.0),
                method: InterpretMethod::Word2Vec,
            };
            return (interp, Some(m.path));
        }
        if let Some(interp) = interpret_cooccurrence(
            predicate,
            self.review_index,
            self.stats,
            self.attributes,
            self.emb,
            self.idf,
            self.lex,
            &self.cooc,
        ) {
            return (interp, None);
        }
        (
            Interpretation {
                body: InterpretationBody::TextFallback(predicate.to_string()),
                confidence: 0.0,
                method: InterpretMethod::TextRetrieval,
            },
            None,
        )
    }
}

/// Shared predicate → interpretation cache with get-or-insert semantics.
#[derive(Debug, Default)]
pub struct InterpretationCache {
    entries: Mutex<BTreeMap<String, Interpretation>>,
}

impl InterpretationCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_insert_with<F>(&self, predicate: &str, compute: F) -> Interpretation
    where
        F: FnOnce() -> Interpretation,
    {
        let mut entries = self.entries.lock().expect("cache poisoned");
        entries
            .entry(predicate.to_string())
            .or_insert_with(compute)
            .clone()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewriterEstimate {
    pub time_ms: f64,
    pub prec: f64,
}

/// A knowledge source that can translate a query term, with per-term time and
/// precision estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewriterProfile {
    pub name: String,
    #[serde(default)]
    pub terms: BTreeMap<String, RewriterEstimate>,
    /// Estimate for terms not listed in `terms`; absent means the rewriter
    /// cannot handle such a term.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<RewriterEstimate>,
}

impl RewriterProfile {
    pub fn estimate(&self, term: &str) -> Option<RewriterEstimate> {
        self.terms.get(term).copied().or(self.default)
    }

    pub fn validate(&self) -> Result<()> {
        for (term, est) in self
            .terms
            .iter()
            .map(|(t, e)| (t.as_str(), e))
            .chain(self.default.iter().map(|e| ("<default>", e)))
        {
            if est.time_ms < 0.0 || !est.time_ms.is_finite() {
                return Err(Error::Config(format!(
                    "rewriter {:?}, term {term:?}: negative or non-finite time",
                    self.name
                )));
            }
            if !(0.0..=1.0).contains(&est.prec) {
                return Err(Error::Config(format!(
                    "rewriter {:?}, term {term:?}: precision outside [0, 1]",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// Load a JSON array of rewriter profiles from disk, validating estimates.
pub fn load_profiles(path: &std::path::Path) -> Result<Vec<RewriterProfile>> {
    let file = std::fs::File::open(path)?;
    let profiles: Vec<RewriterProfile> =
        serde_json::from_reader(std::io::BufReader::new(file))?;
    for profile in &profiles {
        profile.validate()?;
    }
    Ok(profiles)
}

/// One rewriter index per query term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewriterAssignment {
    pub choice: Vec<usize>,
    pub total_prec: f64,
    pub total_time_ms: u64,
}

const MAX_DP_BUDGET: u64 = 10_000_000;

/// Pick one rewriter per term maximizing total (equivalently average)
/// precision subject to the total-time budget — a multiple-choice knapsack
/// solved by dynamic programming over (term, integer millisecond budget).
/// Ties prefer smaller total time, then the lexicographically smallest
/// choice vector. Times are quantized to whole milliseconds by rounding up.
pub fn optimize_rewriters(
    terms: &[String],
    profiles: &[RewriterProfile],
    t_max_ms: u64,
) -> Result<RewriterAssignment> {
    let n = terms.len();
    if n == 0 {
        return Ok(RewriterAssignment {
            choice: Vec::new(),
            total_prec: 0.0,
            total_time_ms: 0,
        });
    }
    // per-term options: (quantized time, precision), None when unavailable
    let options: Vec<Vec<Option<(u64, f64)>>> = terms
        .iter()
        .map(|term| {
            profiles
                .iter()
                .map(|p| p.estimate(term).map(|e| (e.time_ms.ceil() as u64, e.prec)))
                .collect()
        })
        .collect();
    let max_spend: u64 = options
        .iter()
        .map(|opts| opts.iter().flatten().map(|&(t, _)| t).max().unwrap_or(0))
        .sum();
    let budget = t_max_ms.min(max_spend);
    if budget > MAX_DP_BUDGET {
        return Err(Error::Config(format!(
            "optimizer budget {budget} ms exceeds the DP limit {MAX_DP_BUDGET}"
        )));
    }
    let width = budget as usize + 1;

    // suffix DP: dp[i][t] = best (precision sum, time used) for terms i..n
    // within budget t; precision decides, smaller time breaks ties
    let mut dp: Vec<Vec<Option<(f64, u64)>>> = vec![vec![None; width]; n + 1];
    dp[n] = vec![Some((0.0, 0)); width];
    for i in (0..n).rev() {
        for t in 0..width {
            let mut best: Option<(f64, u64)> = None;
            for opt in options[i].iter().flatten() {
                let (time, prec) = *opt;
                if time as usize > t {
                    continue;
                }
                if let Some((rest_prec, rest_time)) = dp[i + 1][t - time as usize] {
                    let cand = (prec + rest_prec, time + rest_time);
                    let better = match best {
                        Some((bp, bt)) => cand.0 > bp || (cand.0 == bp && cand.1 < bt),
                        None => true,
                    };
                    if better {
                        best = Some(cand);
                    }
                }
            }
            dp[i][t] = best;
        }
    }
    let Some((total_prec, total_time)) = dp[0][budget as usize] else {
        return Err(Error::Infeasible(t_max_ms));
    };

    // reconstruct the lexicographically smallest optimal choice vector; the
    // running target is always a stored dp value so float comparisons stay
    // bit-exact
    let mut choice = Vec::with_capacity(n);
    let mut t = budget as usize;
    let (mut need_prec, mut need_time) = (total_prec, total_time);
    for i in 0..n {
        let mut picked = None;
        for (j, opt) in options[i].iter().enumerate() {
            let Some((time, prec)) = *opt else { continue };
            if time as usize > t {
                continue;
            }
            if let Some((rest_prec, rest_time)) = dp[i + 1][t - time as usize] {
                if prec + rest_prec == need_prec && time + rest_time == need_time {
                    picked = Some((j, time, rest_prec, rest_time));
                    break;
                }
            }
        }
        let (j, time, rest_prec, rest_time) = picked.expect("DP table is consistent");
        choice.push(j);
        t -= time as usize;
        need_prec = rest_prec;
        need_time = rest_time;
    }
    Ok(RewriterAssignment {
        choice,
        total_prec,
        total_time_ms: total_time,
    })
}
