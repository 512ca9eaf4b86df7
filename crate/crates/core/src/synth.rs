//! Deterministic synthetic review corpus with planted ground truth: entities
//! carry a hidden per-attribute intensity, reviews realize it through a
//! controlled vocabulary with synonym pairs, and every probe predicate knows
//! which attribute it targets. A small lexicon-based extractor (opinion token
//! plus nearest aspect token) stands in for a learned tagger.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::db::{self, BuildInputs, MembershipLabel, SchemaRecord, SeedPair};
use crate::error::{Error, Result};
use crate::model::{write_jsonl, AttrValue, AttributeKind, Entity, ExtractionRecord, Review};
use crate::text::{tokenize, EmbeddingTable, SentimentLexicon, NEGATORS};

#[derive(Debug, Clone, PartialEq)]
pub struct OpinionLevel {
    /// Synonym pair; both tokens share the level's sentiment.
    pub tokens: [String; 2],
    pub sentiment: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeSpec {
    pub name: String,
    pub kind: AttributeKind,
    /// Aspect synonym pairs (groups).
    pub aspects: Vec<[String; 2]>,
    /// Opinion ladder ordered from most positive to most negative.
    pub opinions: Vec<OpinionLevel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpusSpec {
    pub entity_count: usize,
    pub reviews_per_entity: usize,
    pub attributes: Vec<AttributeSpec>,
    /// Optional [entity][attribute] intensity override in [0, 1]; drawn
    /// uniformly from the seed when absent.
    pub intensities: Option<Vec<Vec<f64>>>,
    /// Probability that a mention draws a uniformly random opinion level.
    pub noise_rate: f64,
    /// Probability that a negative opinion is phrased as `not <positive>`.
    pub negation_rate: f64,
    /// Probability that a review mentions each attribute.
    pub mention_prob: f64,
    /// Ground truth: sat(q, e) = 1 iff intensity > truth_cut.
    pub truth_cut: f64,
    /// Total membership labels to emit (split across attributes).
    pub membership_labels: usize,
    /// Embedding-style probe predicates per attribute.
    pub predicates_per_attribute: usize,
    pub seed: u64,
}

impl Default for SyntheticCorpusSpec {
    fn default() -> Self {
        Self {
            entity_count: 100,
            reviews_per_entity: 20,
            attributes: hotel_attributes(),
            intensities: None,
            noise_rate: 0.05,
            negation_rate: 0.5,
            mention_prob: 0.8,
            truth_cut: 0.6,
            membership_labels: 1000,
            predicates_per_attribute: 6,
            seed: 42,
        }
    }
}

const LEVEL_SENTIMENTS: [f64; 6] = [1.0, 0.6, 0.2, -0.2, -0.6, -1.0];
const INTENSIFIERS: [&str; 2] = ["very", "really"];

fn level(pair: [&str; 2], sentiment: f64) -> OpinionLevel {
    OpinionLevel {
        tokens: [pair[0].to_string(), pair[1].to_string()],
        sentiment,
    }
}

fn attr(
    name: &str,
    kind: AttributeKind,
    aspects: [[&str; 2]; 2],
    opinions: [[&str; 2]; 6],
) -> AttributeSpec {
    AttributeSpec {
        name: name.to_string(),
        kind,
        aspects: aspects
            .iter()
            .map(|p| [p[0].to_string(), p[1].to_string()])
            .collect(),
        opinions: opinions
            .iter()
            .zip(LEVEL_SENTIMENTS)
            .map(|(pair, s)| level(*pair, s))
            .collect(),
    }
}

/// The stock five-attribute hotel schema used by the evaluation harness.
pub fn hotel_attributes() -> Vec<AttributeSpec> {
    vec![
        attr(
            "room_cleanliness",
            AttributeKind::LinearlyOrdered,
            [["room", "suite"], ["carpet", "linens"]],
            [
                ["spotless", "immaculate"],
                ["clean", "tidy"],
                ["presentable", "orderly"],
                ["dusty", "musty"],
                ["dirty", "grimy"],
                ["filthy", "squalid"],
            ],
        ),
        attr(
            "bed_comfort",
            AttributeKind::LinearlyOrdered,
            [["bed", "mattress"], ["pillow", "bedding"]],
            [
                ["heavenly", "plush"],
                ["comfortable", "cozy"],
                ["adequate", "passable"],
                ["lumpy", "saggy"],
                ["uncomfortable", "creaky"],
                ["unbearable", "torturous"],
            ],
        ),
        attr(
            "service",
            AttributeKind::LinearlyOrdered,
            [["staff", "team"], ["reception", "concierge"]],
            [
                ["exceptional", "outstanding"],
                ["friendly", "helpful"],
                ["courteous", "polite"],
                ["indifferent", "aloof"],
                ["rude", "unhelpful"],
                ["hostile", "abysmal"],
            ],
        ),
        attr(
            "bathroom_style",
            AttributeKind::Categorical,
            [["bathroom", "washroom"], ["shower", "bathtub"]],
            [
                ["luxurious", "opulent"],
                ["modern", "sleek"],
                ["stylish", "elegant"],
                ["plain", "ordinary"],
                ["dated", "worn"],
                ["decrepit", "crumbling"],
            ],
        ),
        attr(
            "quietness",
            AttributeKind::LinearlyOrdered,
            [["location", "area"], ["street", "surroundings"]],
            [
                ["serene", "peaceful"],
                ["quiet", "calm"],
                ["muffled", "faint"],
                ["audible", "noticeable"],
                ["noisy", "loud"],
                ["deafening", "thunderous"],
            ],
        ),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    /// The probe is itself an emitted linguistic variation.
    Exact,
    /// One aspect token swapped for its never-emitted synonym mate.
    OneTokenSwap,
    /// Only resolvable through review co-occurrence.
    CoOccurrence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbePredicate {
    pub text: String,
    pub attribute: String,
    pub kind: ProbeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub predicate: String,
    pub attribute: String,
    pub entity_id: String,
    pub sat: bool,
}

#[derive(Debug, Clone)]
pub struct GeneratedCorpus {
    pub entities: Vec<Entity>,
    pub reviews: Vec<Review>,
    /// Extractor output: unclassified (aspect, opinion) pairs.
    pub extractions: Vec<ExtractionRecord>,
    pub schema: Vec<SchemaRecord>,
    pub emb: EmbeddingTable,
    pub lex: SentimentLexicon,
    /// Planted [entity][attribute] intensities.
    pub intensities: Vec<Vec<f64>>,
    pub truth: Vec<TruthRecord>,
    pub predicates: Vec<ProbePredicate>,
    pub membership_labels: Vec<MembershipLabel>,
    /// Opinion/aspect token → owning attribute, for diagnostics.
    pub vocab_attribute: BTreeMap<String, String>,
}

/// The lexicon-based extractor used on generated reviews: each scored token
/// anchors an opinion term (absorbing an adjacent intensifier and negator)
/// and pairs with the nearest aspect-vocabulary token (ties to the left).
pub fn extract_pairs(
    text: &str,
    lex: &SentimentLexicon,
    aspect_vocab: &BTreeSet<String>,
    intensifiers: &BTreeSet<String>,
) -> Vec<(String, String)> {
    let tokens = tokenize(text);
    let aspect_positions: Vec<usize> = tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| aspect_vocab.contains(*t))
        .map(|(i, _)| i)
        .collect();
    let mut pairs = Vec::new();
    for (i, token) in tokens.iter().enumerate() {
        if lex.get(token).is_none() {
            continue;
        }
        let mut start = i;
        if start > 0 && intensifiers.contains(&tokens[start - 1]) {
            start -= 1;
        }
        if start > 0 && NEGATORS.contains(&tokens[start - 1].as_str()) {
            start -= 1;
        }
        let opinion = tokens[start..=i].join(" ");
        // distance from the whole opinion span, ties to the left
        let span_dist = |p: usize| {
            if p < start {
                start - p
            } else { p.saturating_sub(i) }
        };
        let nearest = aspect_positions
            .iter()
            .min_by_key(|&&p| (span_dist(p), p))
            .copied();
        if let Some(p) = nearest {
            pairs.push((tokens[p].clone(), opinion));
        }
    }
    pairs
}

struct Vocab {
    emb: EmbeddingTable,
    lex: SentimentLexicon,
    aspect_vocab: BTreeSet<String>,
    intensifiers: BTreeSet<String>,
    vocab_attribute: BTreeMap<String, String>,
}

fn build_vocab(attributes: &[AttributeSpec]) -> Vocab {
    let a = attributes.len();
    let dim = a + 4;
    let (polarity, jitter_op, group_axis, jitter_asp) = (a, a + 1, a + 2, a + 3);
    let mut emb = EmbeddingTable::new(dim);
    let mut lex = SentimentLexicon::new();
    let mut aspect_vocab = BTreeSet::new();
    let mut vocab_attribute = BTreeMap::new();
    for (i, spec) in attributes.iter().enumerate() {
        for (g, pair) in spec.aspects.iter().enumerate() {
            for (j, token) in pair.iter().enumerate() {
                let mut v = vec![0.0; dim];
                v[i] = 2.0;
                v[group_axis] = 0.6 + 0.35 * g as f64;
                v[jitter_asp] = 0.05 * j as f64;
                emb.insert(token, v);
                aspect_vocab.insert(token.clone());
                vocab_attribute.insert(token.clone(), spec.name.clone());
            }
        }
        for level in &spec.opinions {
            for (j, token) in level.tokens.iter().enumerate() {
                let mut v = vec![0.0; dim];
                v[i] = 2.0;
                v[polarity] = 1.5 * level.sentiment;
                v[jitter_op] = 0.05 * j as f64;
                emb.insert(token, v);
                lex.insert(token, level.sentiment);
                vocab_attribute.insert(token.clone(), spec.name.clone());
            }
        }
    }
    for (j, token) in INTENSIFIERS.iter().enumerate() {
        let mut v = vec![0.0; dim];
        v[jitter_op] = 0.4 + 0.05 * j as f64;
        emb.insert(token, v);
    }
    let mut v = vec![0.0; dim];
    v[polarity] = -2.4;
    emb.insert("not", v);
    Vocab {
        emb,
        lex,
        aspect_vocab,
        intensifiers: INTENSIFIERS.iter().map(|s| s.to_string()).collect(),
        vocab_attribute,
    }
}

fn validate_spec(spec: &SyntheticCorpusSpec) -> Result<()> {
    let bad = |m: &str| Err(Error::InvalidSpec(m.to_string()));
    if spec.entity_count == 0 || spec.reviews_per_entity == 0 {
        return bad("entity and review counts must be positive");
    }
    if spec.attributes.is_empty() {
        return bad("need at least one attribute");
    }
    if !(0.0..1.0).contains(&spec.noise_rate) {
        return bad("noise_rate must be in [0, 1)");
    }
    if !(0.0..=1.0).contains(&spec.negation_rate) || !(0.0..=1.0).contains(&spec.mention_prob) {
        return bad("negation_rate and mention_prob must be in [0, 1]");
    }
    if !(0.0..1.0).contains(&spec.truth_cut) {
        return bad("truth_cut must be in [0, 1)");
    }
    for a in &spec.attributes {
        if a.opinions.len() < 2 || a.aspects.is_empty() {
            return bad("each attribute needs >= 2 opinion levels and >= 1 aspect pair");
        }
    }
    if let Some(matrix) = &spec.intensities {
        if matrix.len() != spec.entity_count
            || matrix.iter().any(|row| row.len() != spec.attributes.len())
        {
            return bad("intensity override has wrong shape");
        }
        if matrix
            .iter()
            .flatten()
            .any(|v| !(0.0..=1.0).contains(v))
        {
            return bad("intensities must lie in [0, 1]");
        }
    }
    Ok(())
}

const SENTENCE_TEMPLATES: usize = 4;

fn render_sentence(template: usize, aspect: &str, opinion: &str) -> String {
    match template % SENTENCE_TEMPLATES {
        0 => format!("the {aspect} was {opinion}"),
        1 => format!("{opinion} {aspect}"),
        2 => format!("we found the {aspect} rather {opinion}"),
        _ => format!("overall {opinion} {aspect} here"),
    }
}

/// Generate the corpus. Deterministic for a fixed spec (same seed twice →
/// identical output).
pub fn generate_corpus(spec: &SyntheticCorpusSpec) -> Result<GeneratedCorpus> {
    validate_spec(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let vocab = build_vocab(&spec.attributes);
    let a_count = spec.attributes.len();

    let intensities: Vec<Vec<f64>> = match &spec.intensities {
        Some(m) => m.clone(),
        None => (0..spec.entity_count)
            .map(|_| (0..a_count).map(|_| rng.random_range(0.0..=1.0)).collect())
            .collect(),
    };

    let id_width = spec.entity_count.to_string().len();
    let cities = ["london", "amsterdam", "tokyo", "toronto"];
    let entities: Vec<Entity> = (0..spec.entity_count)
        .map(|e| {
            let mut objective_attrs = BTreeMap::new();
            objective_attrs.insert(
                "price_pn".to_string(),
                AttrValue::Number(rng.random_range(50..300) as f64),
            );
            objective_attrs.insert(
                "city".to_string(),
                AttrValue::Text(cities[rng.random_range(0..cities.len())].to_string()),
            );
            Entity {
                id: format!("e{e:0width$}", width = id_width),
                objective_attrs,
            }
        })
        .collect();

    // co-occurrence planting: two special review kinds tied to a pair of
    // attributes, appended for entities strong in both
    let (cooc_a, cooc_b) = if a_count >= 2 {
        let a = 2.min(a_count - 1);
        let mut b = 3.min(a_count - 1);
        if b == a {
            b = (a + 1) % a_count;
        }
        (Some(a), Some(b))
    } else {
        (None, None)
    };

    let mut reviews = Vec::new();
    let mut extractions = Vec::new();
    // phrases emitted without intensifier or negation, by attribute:
    // (level, synonym index, aspect group)
    let mut plain_positive: Vec<BTreeSet<(usize, usize, usize)>> = vec![BTreeSet::new(); a_count];
    let mut emitted_phrases: BTreeSet<String> = BTreeSet::new();
    let mut emitted_tokens: BTreeSet<String> = BTreeSet::new();

    let review_width = spec.reviews_per_entity.to_string().len();
    for (e, entity) in entities.iter().enumerate() {
        for r in 0..spec.reviews_per_entity {
            let mut sentences = Vec::new();
            for (ai, attribute) in spec.attributes.iter().enumerate() {
                if rng.random::<f64>() >= spec.mention_prob {
                    continue;
                }
                let levels = attribute.opinions.len();
                let level = if rng.random::<f64>() < spec.noise_rate {
                    rng.random_range(0..levels)
                } else {
                    ((1.0 - intensities[e][ai]) * (levels - 1) as f64).round() as usize
                };
                let j = rng.random_range(0..2usize);
                let g = rng.random_range(0..attribute.aspects.len());
                // synonym parity: aspect mate index always equals the
                // opinion mate index, leaving the cross combinations as
                // holes for the substitution index to bridge
                let aspect = &attribute.aspects[g][j];
                let sentiment = attribute.opinions[level].sentiment;
                let negated = sentiment < 0.0 && rng.random::<f64>() < spec.negation_rate;
                let opinion = if negated {
                    let mirror = levels - 1 - level;
                    format!("not {}", attribute.opinions[mirror].tokens[j])
                } else if rng.random::<f64>() < 0.35 {
                    let intensity_j = rng.random_range(0..2usize);
                    format!("{} {}", INTENSIFIERS[intensity_j], attribute.opinions[level].tokens[j])
                } else {
                    attribute.opinions[level].tokens[j].clone()
                };
                let template = rng.random_range(0..SENTENCE_TEMPLATES);
                sentences.push(render_sentence(template, aspect, &opinion));

                let phrase = format!("{opinion} {aspect}");
                emitted_phrases.insert(phrase.clone());
                for t in tokenize(&phrase) {
                    emitted_tokens.insert(t);
                }
                if !negated && !opinion.contains(' ') && level <= 1 {
                    plain_positive[ai].insert((level, j, g));
                }
            }
            if sentences.is_empty() {
                // a review must carry text; fall back to a neutral filler
                sentences.push("stayed one night".to_string());
            }
            let year = 2015 + rng.random_range(0..10);
            let month = rng.random_range(1..=12);
            let day = rng.random_range(1..=28);
            reviews.push(Review {
                entity_id: entity.id.clone(),
                review_id: format!("r{r:0review_width$}"),
                text: sentences.join(" . "),
                date: Some(format!("{year:04}-{month:02}-{day:02}")),
            });
        }
        // special co-occurrence reviews for doubly-strong entities
        if let (Some(a), Some(b)) = (cooc_a, cooc_b) {
            if intensities[e][a] > 0.7 && intensities[e][b] > 0.7 {
                let strong = |ai: usize, slot: usize| {
                    let attribute = &spec.attributes[ai];
                    let aspect = &attribute.aspects[slot % attribute.aspects.len()][0];
                    let opinion = &attribute.opinions[0].tokens[0];
                    format!("the {aspect} was {opinion}")
                };
                reviews.push(Review {
                    entity_id: entity.id.clone(),
                    review_id: "c0".into(),
                    text: format!(
                        "perfect honeymoon getaway spot . {} . {} . {}",
                        strong(a, 0),
                        strong(a, 1),
                        strong(b, 0)
                    ),
                    date: Some("2023-06-15".into()),
                });
                reviews.push(Review {
                    entity_id: entity.id.clone(),
                    review_id: "c1".into(),
                    text: format!(
                        "lovely anniversary celebration . {} . {} . {}",
                        strong(b, 0),
                        strong(b, 1),
                        strong(a, 0)
                    ),
                    date: Some("2023-07-20".into()),
                });
            }
        }
    }

    // run the extractor over every review
    for review in &reviews {
        for (aspect, opinion) in
            extract_pairs(&review.text, &vocab.lex, &vocab.aspect_vocab, &vocab.intensifiers)
        {
            extractions.push(ExtractionRecord {
                entity_id: review.entity_id.clone(),
                review_id: review.review_id.clone(),
                aspect_term: aspect,
                opinion_term: opinion,
                attribute: None,
            });
        }
    }

    // schema seeds: first-synonym tokens only, so expansion has mates to find
    let schema: Vec<SchemaRecord> = spec
        .attributes
        .iter()
        .map(|a| SchemaRecord {
            name: a.name.clone(),
            kind: a.kind,
            seeds: SeedPair {
                aspects: a.aspects.iter().map(|p| p[0].clone()).collect(),
                opinions: a.opinions.iter().map(|l| l.tokens[0].clone()).collect(),
            },
        })
        .collect();

    // probe predicates
    let mut predicates = Vec::new();
    for (ai, attribute) in spec.attributes.iter().enumerate() {
        let pool: Vec<(usize, usize, usize)> = plain_positive[ai].iter().copied().collect();
        if pool.is_empty() {
            continue;
        }
        let exact_target = spec.predicates_per_attribute.div_ceil(2);
        let mut texts = BTreeSet::new();
        let mut guard = 0;
        while texts.len() < exact_target.min(pool.len()) && guard < 200 {
            guard += 1;
            let (l, j, g) = *pool.choose(&mut rng).unwrap();
            let text = format!(
                "{} {}",
                attribute.opinions[l].tokens[j], attribute.aspects[g][j]
            );
            if texts.insert(text.clone()) {
                predicates.push(ProbePredicate {
                    text,
                    attribute: attribute.name.clone(),
                    kind: ProbeKind::Exact,
                });
            }
        }
        let mut guard = 0;
        while texts.len() < spec.predicates_per_attribute.min(2 * pool.len()) && guard < 200 {
            guard += 1;
            let (l, j, g) = *pool.choose(&mut rng).unwrap();
            let mate = 1 - j;
            let swapped_aspect = &attribute.aspects[g][mate];
            let text = format!("{} {}", attribute.opinions[l].tokens[j], swapped_aspect);
            // the swap must land in a hole while its tokens stay indexed
            if emitted_phrases.contains(&text) || !emitted_tokens.contains(swapped_aspect) {
                continue;
            }
            if texts.insert(text.clone()) {
                predicates.push(ProbePredicate {
                    text,
                    attribute: attribute.name.clone(),
                    kind: ProbeKind::OneTokenSwap,
                });
            }
        }
    }
    if let (Some(a), Some(b)) = (cooc_a, cooc_b) {
        let planted = reviews.iter().any(|r| r.review_id == "c0");
        if planted {
            predicates.push(ProbePredicate {
                text: "honeymoon getaway".into(),
                attribute: spec.attributes[a].name.clone(),
                kind: ProbeKind::CoOccurrence,
            });
            predicates.push(ProbePredicate {
                text: "anniversary celebration".into(),
                attribute: spec.attributes[b].name.clone(),
                kind: ProbeKind::CoOccurrence,
            });
        }
    }

    // ground truth over the probe × entity grid
    let attr_index: BTreeMap<&str, usize> = spec
        .attributes
        .iter()
        .enumerate()
        .map(|(i, a)| (a.name.as_str(), i))
        .collect();
    let mut truth = Vec::new();
    for probe in &predicates {
        let ai = attr_index[probe.attribute.as_str()];
        for (e, entity) in entities.iter().enumerate() {
            truth.push(TruthRecord {
                predicate: probe.text.clone(),
                attribute: probe.attribute.clone(),
                entity_id: entity.id.clone(),
                sat: intensities[e][ai] > spec.truth_cut,
            });
        }
    }

    // membership labels: per attribute, median split of the intensities
    let mut membership_labels = Vec::new();
    if spec.membership_labels > 0 {
        let per_attr = spec.membership_labels.div_ceil(a_count);
        for (ai, attribute) in spec.attributes.iter().enumerate() {
            let mut sorted: Vec<f64> = intensities.iter().map(|row| row[ai]).collect();
            sorted.sort_by(f64::total_cmp);
            let median = sorted[sorted.len() / 2];
            let phrases: Vec<&ProbePredicate> = predicates
                .iter()
                .filter(|p| p.attribute == attribute.name && p.kind != ProbeKind::CoOccurrence)
                .collect();
            if phrases.is_empty() {
                continue;
            }
            for i in 0..per_attr {
                let e = if i < spec.entity_count {
                    i
                } else {
                    rng.random_range(0..spec.entity_count)
                };
                let phrase = phrases[rng.random_range(0..phrases.len())];
                membership_labels.push(MembershipLabel {
                    entity_id: entities[e].id.clone(),
                    attribute: attribute.name.clone(),
                    phrase: phrase.text.clone(),
                    label: intensities[e][ai] > median,
                });
            }
        }
        membership_labels.truncate(spec.membership_labels);
    }

    Ok(GeneratedCorpus {
        entities,
        reviews,
        extractions,
        schema,
        emb: vocab.emb,
        lex: vocab.lex,
        intensities,
        truth,
        predicates,
        membership_labels,
        vocab_attribute: vocab.vocab_attribute,
    })
}

impl GeneratedCorpus {
    pub fn to_build_inputs(&self) -> BuildInputs {
        BuildInputs {
            entities: self.entities.clone(),
            reviews: self.reviews.clone(),
            extractions: self.extractions.clone(),
            schema: self.schema.clone(),
            emb: self.emb.clone(),
            lex: self.lex.clone(),
            membership_labels: self.membership_labels.clone(),
        }
    }

    /// Write the standard input files plus truth and probe metadata.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_jsonl(&dir.join(db::files::ENTITIES), &self.entities)?;
        write_jsonl(&dir.join(db::files::REVIEWS), &self.reviews)?;
        write_jsonl(&dir.join(db::files::EXTRACTIONS), &self.extractions)?;
        write_jsonl(&dir.join(db::files::SCHEMA), &self.schema)?;
        self.emb.save(&dir.join(db::files::EMBEDDINGS))?;
        self.lex.save(&dir.join(db::files::LEXICON))?;
        write_jsonl(&dir.join(db::files::MEMBERSHIP_LABELS), &self.membership_labels)?;
        write_jsonl(&dir.join(db::files::TRUTH), &self.truth)?;
        write_jsonl(&dir.join(db::files::PREDICATES), &self.predicates)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> SyntheticCorpusSpec {
        SyntheticCorpusSpec {
            entity_count: 12,
            reviews_per_entity: 6,
            membership_labels: 40,
            seed: 7,
            ..SyntheticCorpusSpec::default()
        }
    }

    #[test]
    fn same_seed_twice_is_identical() {
        let a = generate_corpus(&small_spec()).unwrap();
        let b = generate_corpus(&small_spec()).unwrap();
        assert_eq!(a.reviews, b.reviews);
        assert_eq!(a.extractions, b.extractions);
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.predicates, b.predicates);
        assert_eq!(a.membership_labels, b.membership_labels);
        // and byte-identical on disk
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        a.write_to(d1.path()).unwrap();
        b.write_to(d2.path()).unwrap();
        for name in [db::files::REVIEWS, db::files::TRUTH, db::files::EMBEDDINGS] {
            assert_eq!(
                std::fs::read(d1.path().join(name)).unwrap(),
                std::fs::read(d2.path().join(name)).unwrap(),
                "{name} differs"
            );
        }
    }

    #[test]
    fn different_seeds_differ() {
        let a = generate_corpus(&small_spec()).unwrap();
        let b = generate_corpus(&SyntheticCorpusSpec {
            seed: 8,
            ..small_spec()
        })
        .unwrap();
        assert_ne!(a.reviews, b.reviews);
    }

    #[test]
    fn extractor_pairs_opinions_with_nearest_aspect() {
        let spec = small_spec();
        let vocab = build_vocab(&spec.attributes);
        let pairs = extract_pairs(
            "the room was very clean . the staff was not friendly",
            &vocab.lex,
            &vocab.aspect_vocab,
            &vocab.intensifiers,
        );
        assert_eq!(
            pairs,
            vec![
                ("room".to_string(), "very clean".to_string()),
                ("staff".to_string(), "not friendly".to_string()),
            ]
        );
    }

    #[test]
    fn full_intensity_zero_noise_yields_top_level_phrases_only() {
        let mut spec = small_spec();
        spec.noise_rate = 0.0;
        spec.negation_rate = 0.0;
        spec.intensities = Some(vec![vec![1.0; spec.attributes.len()]; spec.entity_count]);
        let corpus = generate_corpus(&spec).unwrap();
        // every extracted opinion token is from level 0 of its attribute
        let top_tokens: BTreeSet<&str> = spec
            .attributes
            .iter()
            .flat_map(|a| a.opinions[0].tokens.iter().map(|s| s.as_str()))
            .collect();
        for record in &corpus.extractions {
            let last = tokenize(&record.opinion_term).pop().unwrap();
            assert!(top_tokens.contains(last.as_str()), "{}", record.opinion_term);
        }
    }

    #[test]
    fn truth_marginals_match_the_cut() {
        let spec = SyntheticCorpusSpec {
            entity_count: 1000,
            reviews_per_entity: 1,
            membership_labels: 0,
            predicates_per_attribute: 2,
            seed: 3,
            ..SyntheticCorpusSpec::default()
        };
        let corpus = generate_corpus(&spec).unwrap();
        let sat = corpus.truth.iter().filter(|t| t.sat).count() as f64;
        let frac = sat / corpus.truth.len() as f64;
        // θ ~ U[0,1], cut 0.6 → expect ≈ 0.4 up to sampling noise
        assert!(
            (frac - (1.0 - spec.truth_cut)).abs() < 0.05,
            "marginal {frac}"
        );
    }

    #[test]
    fn probe_kinds_are_planted_correctly() {
        let corpus = generate_corpus(&SyntheticCorpusSpec::default()).unwrap();
        let emitted: BTreeSet<String> = corpus
            .extractions
            .iter()
            .map(|r| r.phrase())
            .collect();
        let exact = corpus
            .predicates
            .iter()
            .filter(|p| p.kind == ProbeKind::Exact)
            .count();
        let swaps = corpus
            .predicates
            .iter()
            .filter(|p| p.kind == ProbeKind::OneTokenSwap)
            .count();
        assert!(exact >= 10, "only {exact} exact probes");
        assert!(swaps >= 5, "only {swaps} swap probes");
        for probe in &corpus.predicates {
            match probe.kind {
                ProbeKind::Exact => {
                    assert!(emitted.contains(&probe.text), "{} not emitted", probe.text)
                }
                ProbeKind::OneTokenSwap => {
                    assert!(!emitted.contains(&probe.text), "{} unexpectedly emitted", probe.text)
                }
                ProbeKind::CoOccurrence => {
                    assert!(!emitted.contains(&probe.text));
                }
            }
        }
        assert_eq!(
            corpus
                .predicates
                .iter()
                .filter(|p| p.kind == ProbeKind::CoOccurrence)
                .count(),
            2
        );
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = small_spec();
        spec.noise_rate = 1.0;
        assert!(matches!(generate_corpus(&spec), Err(Error::InvalidSpec(_))));
        let mut spec = small_spec();
        spec.entity_count = 0;
        assert!(matches!(generate_corpus(&spec), Err(Error::InvalidSpec(_))));
        let mut spec = small_spec();
        spec.intensities = Some(vec![vec![0.5; 2]; 3]);
        assert!(matches!(generate_corpus(&spec), Err(Error::InvalidSpec(_))));
    }
}
