//! Turns raw extractions into a subjective schema: classifies (aspect,
//! opinion) pairs onto attributes via seed expansion, generates markers by
//! sentiment bucketing or k-means, and aggregates phrases into marker
//! summaries.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ExtractionRecord, Marker, MarkerSummary, Review, SeedSet, SubjectiveAttribute};
use crate::text::{cosine, rep, senti_phrase, EmbeddingTable, IdfTable, SentimentLexicon};

/// A training example for the attribute classifier: a phrase built from one
/// (aspect seed, opinion seed) pair, labeled with its attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPhrase {
    pub phrase: String,
    pub attribute: String,
}

/// Inclusive ISO-date window. Reviews without a date always pass.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: Option<String>,
    pub end: Option<String>,
}

impl DateRange {
    pub fn contains(&self, date: Option<&str>) -> bool {
        let Some(date) = date else { return true };
        if let Some(start) = &self.start {
            if date < start.as_str() {
                return false;
            }
        }
        if let Some(end) = &self.end {
            if date > end.as_str() {
                return false;
            }
        }
        true
    }
}

/// Augment every single-token in-vocabulary seed term with its `per_seed`
/// nearest vocabulary tokens by cosine similarity. Multi-token and
/// out-of-vocabulary seeds are kept unexpanded. Ties break lexicographically.
pub fn expand_seeds(
    seeds: &SeedSet,
    emb: &EmbeddingTable,
    per_seed: usize,
) -> SeedSet {
    let expand_side = |terms: &BTreeSet<String>| -> BTreeSet<String> {
        let mut out = terms.clone();
        if per_seed == 0 {
            return out;
        }
        for term in terms {
            let Some(term_vec) = emb.get(term) else { continue };
            let mut scored: Vec<(&str, f64)> = emb
                .tokens()
                .filter(|t| *t != term && !terms.contains(*t))
                .map(|t| (t, cosine(term_vec, emb.get(t).unwrap())))
                .collect();
            scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
            for (token, _) in scored.into_iter().take(per_seed) {
                out.insert(token.to_string());
            }
        }
        out
    };
    SeedSet {
        attribute: seeds.attribute.clone(),
        aspects: expand_side(&seeds.aspects),
        opinions: expand_side(&seeds.opinions),
    }
}

/// One labeled phrase per (aspect, opinion) pair in the cross product of each
/// attribute's seed sets, using the canonical opinion-first phrase rule.
pub fn build_training_set(seed_sets: &[SeedSet]) -> Vec<LabeledPhrase> {
    let mut out = Vec::new();
    for seeds in seed_sets {
        for aspect in &seeds.aspects {
            for opinion in &seeds.opinions {
                out.push(LabeledPhrase {
                    phrase: crate::text::normalize(&format!("{opinion} {aspect}")),
                    attribute: seeds.attribute.clone(),
                });
            }
        }
    }
    out
}

/// Mean representation vector of each attribute's labeled phrases. Phrases
/// with no in-vocabulary token are skipped.
pub fn build_centroids(
    training: &[LabeledPhrase],
    emb: &EmbeddingTable,
    idf: &IdfTable,
) -> BTreeMap<String, Vec<f64>> {
    let mut sums: BTreeMap<String, (Vec<f64>, usize)> = BTreeMap::new();
    for example in training {
        let Ok(vector) = rep(&example.phrase, emb, idf) else { continue };
        let entry = sums
            .entry(example.attribute.clone())
            .or_insert_with(|| (vec![0.0; emb.dim()], 0));
        for (a, v) in entry.0.iter_mut().zip(&vector) {
            *a += v;
        }
        entry.1 += 1;
    }
    sums.into_iter()
        .map(|(attr, (mut sum, n))| {
            for v in &mut sum {
                *v /= n as f64;
            }
            (attr, sum)
        })
        .collect()
}

/// Nearest-centroid classification of a phrase. Returns None when the best
/// cosine falls below `reject_threshold` or the phrase has no in-vocabulary
/// token; such phrases are left unassigned.
pub fn classify_attribute(
    phrase: &str,
    centroids: &BTreeMap<String, Vec<f64>>,
    emb: &EmbeddingTable,
    idf: &IdfTable,
    reject_threshold: f64,
) -> Option<String> {
    let vector = rep(phrase, emb, idf).ok()?;
    let mut best: Option<(&str, f64)> = None;
    for (attr, centroid) in centroids {
        let sim = cosine(&vector, centroid);
        match best {
            Some((_, s)) if s >= sim => {}
            _ => best = Some((attr, sim)),
        }
    }
    let (attr, sim) = best?;
    if sim < reject_threshold {
        None
    } else {
        Some(attr.to_string())
    }
}

fn marker_name(phrase: &str) -> String {
    phrase.replace(' ', "_")
}

fn make_marker(phrase: &str, emb: &EmbeddingTable, idf: &IdfTable, lex: &SentimentLexicon) -> Marker {
    let embedding = rep(phrase, emb, idf).unwrap_or_else(|_| vec![0.0; emb.dim()]);
    Marker {
        name: marker_name(phrase),
        representative_phrase: phrase.to_string(),
        embedding,
        sentiment: senti_phrase(phrase, lex),
    }
}

/// Sentiment bucketing for linearly-ordered domains: sort phrases by
/// sentiment descending (ties lexicographic), split into k contiguous buckets
/// whose sizes differ by at most one (larger buckets first), and take the
/// lower-middle element of each bucket as its marker.
pub fn generate_markers_linear(
    domain: &[String],
    k: usize,
    emb: &EmbeddingTable,
    idf: &IdfTable,
    lex: &SentimentLexicon,
) -> Result<Vec<Marker>> {
    if k < 2 || domain.len() < k {
        return Err(Error::DomainTooSmall {
            len: domain.len(),
            k,
        });
    }
    let mut phrases: Vec<&String> = domain.iter().collect();
    phrases.sort_by(|a, b| {
        senti_phrase(b, lex)
            .total_cmp(&senti_phrase(a, lex))
            .then_with(|| a.cmp(b))
    });
    let n = phrases.len();
    let base = n / k;
    let rem = n % k;
    let mut markers = Vec::with_capacity(k);
    let mut start = 0;
    for bucket in 0..k {
        let size = base + usize::from(bucket < rem);
        let middle = start + (size - 1) / 2;
        markers.push(make_marker(phrases[middle], emb, idf, lex));
        start += size;
    }
    Ok(markers)
}

#[derive(Debug, Clone)]
pub struct KmeansResult {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Seeded k-means with k-means++ initialization, at most 100 iterations,
/// convergence when the largest centroid shift drops below 1e−6. Empty
/// clusters are re-seeded from the point farthest from its own centroid.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> KmeansResult {
    assert!(k >= 1 && points.len() >= k, "need at least k points");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++ seeding
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..points.len())].clone());
    let mut dist2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = dist2.iter().sum();
        let next = if total <= 0.0 {
            rng.random_range(0..points.len())
        } else {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, d) in dist2.iter().enumerate() {
                if target < *d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        };
        centroids.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            dist2[i] = dist2[i].min(sq_dist(p, centroids.last().unwrap()));
        }
    }

    let dim = points[0].len();
    let mut assignments = vec![0usize; points.len()];
    let mut iterations = 0;
    for iter in 0..100 {
        iterations = iter + 1;
        // assignment step (ties go to the lowest cluster index)
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let d = sq_dist(p, centroid);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            assignments[i] = best;
        }
        // re-seed empty clusters from the farthest point
        loop {
            let mut counts = vec![0usize; k];
            for &a in &assignments {
                counts[a] += 1;
            }
            let Some(empty) = counts.iter().position(|&c| c == 0) else { break };
            let farthest = (0..points.len())
                .filter(|&i| counts[assignments[i]] > 1)
                .max_by(|&a, &b| {
                    sq_dist(&points[a], &centroids[assignments[a]])
                        .total_cmp(&sq_dist(&points[b], &centroids[assignments[b]]))
                })
                .expect("some cluster must have more than one point");
            centroids[empty] = points[farthest].clone();
            assignments[farthest] = empty;
        }
        // update step
        let mut shift: f64 = 0.0;
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let members: Vec<usize> = (0..points.len()).filter(|&i| assignments[i] == c).collect();
            let mut mean = vec![0.0; dim];
            for &i in &members {
                for (m, v) in mean.iter_mut().zip(&points[i]) {
                    *m += v;
                }
            }
            for m in &mut mean {
                *m /= members.len() as f64;
            }
            shift = shift.max(sq_dist(&mean, centroid).sqrt());
            *centroid = mean;
        }
        if shift < 1e-6 {
            break;
        }
    }

    KmeansResult {
        assignments,
        centroids,
        iterations,
    }
}

/// k-means clustering for categorical domains: markers are the phrases
/// nearest to each final centroid, ordered by marker name.
pub fn generate_markers_categorical(
    domain: &[String],
    k: usize,
    emb: &EmbeddingTable,
    idf: &IdfTable,
    lex: &SentimentLexicon,
    seed: u64,
) -> Result<Vec<Marker>> {
    if k < 2 {
        return Err(Error::DomainTooSmall {
            len: domain.len(),
            k,
        });
    }
    let mut phrases: Vec<&String> = Vec::new();
    let mut points: Vec<Vec<f64>> = Vec::new();
    for phrase in domain {
        if let Ok(v) = rep(phrase, emb, idf) {
            phrases.push(phrase);
            points.push(v);
        }
    }
    if phrases.len() < k {
        return Err(Error::DomainTooSmall {
            len: phrases.len(),
            k,
        });
    }
    let result = kmeans(&points, k, seed);
    let mut markers = Vec::with_capacity(k);
    for c in 0..k {
        let best = (0..points.len())
            .filter(|&i| result.assignments[i] == c)
            .min_by(|&a, &b| {
                sq_dist(&points[a], &result.centroids[c])
                    .total_cmp(&sq_dist(&points[b], &result.centroids[c]))
                    .then_with(|| phrases[a].cmp(phrases[b]))
            })
            .expect("every cluster is nonempty after re-seeding");
        markers.push(make_marker(phrases[best], emb, idf, lex));
    }
    markers.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(markers)
}

/// What happened to one extraction record during aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateOutcome {
    Applied,
    OutOfDateRange,
    /// No token of the phrase is in the embedding vocabulary.
    Unrepresentable,
}

/// Counts of records that did not land in any summary.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SkipReport {
    pub unrepresentable: usize,
    pub out_of_date_range: usize,
    pub unlabeled: usize,
}

/// (entity id, attribute name) → summary.
pub type SummaryMap = BTreeMap<(String, String), MarkerSummary>;

/// Shared context for building marker summaries incrementally. Holds the
/// schema, text tables, the optional date filter, and review dates.
pub struct SummaryBuilder<'a> {
    attributes: BTreeMap<&'a str, &'a SubjectiveAttribute>,
    emb: &'a EmbeddingTable,
    idf: &'a IdfTable,
    lex: &'a SentimentLexicon,
    date_range: Option<DateRange>,
    review_dates: BTreeMap<(String, String), Option<String>>,
}

impl<'a> SummaryBuilder<'a> {
    pub fn new(
        attributes: &'a [SubjectiveAttribute],
        emb: &'a EmbeddingTable,
        idf: &'a IdfTable,
        lex: &'a SentimentLexicon,
        reviews: &[Review],
        date_range: Option<DateRange>,
    ) -> Self {
        Self {
            attributes: attributes.iter().map(|a| (a.name.as_str(), a)).collect(),
            emb,
            idf,
            lex,
            date_range,
            review_dates: reviews
                .iter()
                .map(|r| {
                    (
                        (r.entity_id.clone(), r.review_id.clone()),
                        r.date.clone(),
                    )
                })
                .collect(),
        }
    }

    pub fn new_summary(&self, entity_id: &str, attribute: &str) -> MarkerSummary {
        MarkerSummary::empty(entity_id, attribute, self.emb.dim())
    }

    /// Marker of `attribute` whose embedding has the highest cosine with the
    /// phrase representation; ties keep the earlier marker.
    pub fn nearest_marker(&self, attribute: &SubjectiveAttribute, phrase_rep: &[f64]) -> usize {
        let mut best = 0;
        let mut best_sim = f64::NEG_INFINITY;
        for (i, marker) in attribute.markers.iter().enumerate() {
            let sim = cosine(phrase_rep, &marker.embedding);
            if sim > best_sim {
                best_sim = sim;
                best = i;
            }
        }
        best
    }

    /// Fold one classified extraction into the summary. The result is
    /// identical to rebuilding from scratch with the record appended.
    pub fn update_summary(
        &self,
        summary: &mut MarkerSummary,
        record: &ExtractionRecord,
    ) -> Result<UpdateOutcome> {
        let attr_name = record.attribute.as_deref().unwrap_or("");
        if attr_name != summary.attribute {
            return Err(Error::AttributeMismatch {
                expected: summary.attribute.clone(),
                got: attr_name.to_string(),
            });
        }
        if let Some(range) = &self.date_range {
            let date = self
                .review_dates
                .get(&(record.entity_id.clone(), record.review_id.clone()))
                .and_then(|d| d.as_deref());
            if !range.contains(date) {
                return Ok(UpdateOutcome::OutOfDateRange);
            }
        }
        let attribute = self
            .attributes
            .get(attr_name)
            .unwrap_or_else(|| panic!("attribute {attr_name:?} missing from builder schema"));
        let phrase = record.phrase();
        let Ok(phrase_rep) = rep(&phrase, self.emb, self.idf) else {
            return Ok(UpdateOutcome::Unrepresentable);
        };
        let marker = &attribute.markers[self.nearest_marker(attribute, &phrase_rep)];
        let senti = senti_phrase(&phrase, self.lex);

        summary.total += 1;
        let n = summary.total as f64;
        summary.avg_sentiment += (senti - summary.avg_sentiment) / n;
        for (c, v) in summary.centroid.iter_mut().zip(&phrase_rep) {
            *c += (v - *c) / n;
        }
        let marker_count = summary.counts.entry(marker.name.clone()).or_insert(0);
        *marker_count += 1;
        let m = *marker_count as f64;
        let pms = summary
            .per_marker_sentiment
            .entry(marker.name.clone())
            .or_insert(0.0);
        *pms += (senti - *pms) / m;
        Ok(UpdateOutcome::Applied)
    }
}

/// Batch aggregation: fold every classified record into its (entity,
/// attribute) summary, in input order. Records without a label, outside the
/// date range, or with no representable token are skipped and counted.
pub fn aggregate_summaries(
    records: &[ExtractionRecord],
    builder: &SummaryBuilder,
) -> Result<(SummaryMap, SkipReport)> {
    let mut summaries: SummaryMap = BTreeMap::new();
    let mut report = SkipReport::default();
    for record in records {
        let Some(attr) = record.attribute.clone() else {
            report.unlabeled += 1;
            continue;
        };
        let key = (record.entity_id.clone(), attr);
        let summary = summaries
            .entry(key.clone())
            .or_insert_with(|| builder.new_summary(&key.0, &key.1));
        match builder.update_summary(summary, record)? {
            UpdateOutcome::Applied => {}
            UpdateOutcome::OutOfDateRange => report.out_of_date_range += 1,
            UpdateOutcome::Unrepresentable => report.unrepresentable += 1,
        }
    }
    Ok((summaries, report))
}

/// Deduplicated linguistic domain per attribute: the distinct canonical
/// phrases among records classified to it, in lexicographic order.
pub fn linguistic_domains(records: &[ExtractionRecord]) -> BTreeMap<String, Vec<String>> {
    let mut domains: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for record in records {
        if let Some(attr) = &record.attribute {
            domains
                .entry(attr.clone())
                .or_default()
                .insert(record.phrase());
        }
    }
    domains
        .into_iter()
        .map(|(attr, set)| (attr, set.into_iter().collect()))
        .collect()
}
