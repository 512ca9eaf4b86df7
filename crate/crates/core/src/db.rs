//! End-to-end assembly: load JSONL inputs, run the build pipeline
//! (classification → markers → summaries → indexes → models), persist the
//! artifacts, and serve the lookups query evaluation needs.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::interpreter::{
    interpret_w2v, CoocStats, InterpretationCache, InterpreterContext, VariationIndex,
};
use crate::membership::{
    self, mf, MembershipModel, TrainingExample,
};
use crate::model::{
    read_jsonl, validate_schema, write_jsonl, AttributeKind, Entity, ExtractionRecord,
    Interpretation, MarkerSummary, Review, SeedSet, SubjectiveAttribute, ValidationReport,
};
use crate::retrieval::{build_entity_documents, review_doc_id, sigmoid, InvertedIndex};
use crate::schema_builder::{
    aggregate_summaries, build_centroids, build_training_set, classify_attribute, expand_seeds,
    generate_markers_categorical, generate_markers_linear, linguistic_domains, SkipReport,
    SummaryBuilder,
};
use crate::text::{build_idf, rep, tokenize, EmbeddingTable, IdfTable, SentimentLexicon};

/// One line of `schema.jsonl`: attribute name, kind, and designer seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaRecord {
    pub name: String,
    pub kind: AttributeKind,
    pub seeds: SeedPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedPair {
    pub aspects: BTreeSet<String>,
    pub opinions: BTreeSet<String>,
}

/// One line of `membership_labels.jsonl`: whether `entity_id`'s summary for
/// `attribute` satisfies `phrase`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipLabel {
    pub entity_id: String,
    pub attribute: String,
    pub phrase: String,
    pub label: bool,
}

/// Everything the build pipeline consumes, already parsed.
#[derive(Debug, Clone)]
pub struct BuildInputs {
    pub entities: Vec<Entity>,
    pub reviews: Vec<Review>,
    pub extractions: Vec<ExtractionRecord>,
    pub schema: Vec<SchemaRecord>,
    pub emb: EmbeddingTable,
    pub lex: SentimentLexicon,
    pub membership_labels: Vec<MembershipLabel>,
}

/// Canonical file names inside a data directory.
pub mod files {
    pub const ENTITIES: &str = "entities.jsonl";
    pub const REVIEWS: &str = "reviews.jsonl";
    pub const EXTRACTIONS: &str = "extractions.jsonl";
    pub const SCHEMA: &str = "schema.jsonl";
    pub const EMBEDDINGS: &str = "embeddings.txt";
    pub const LEXICON: &str = "lexicon.tsv";
    pub const MEMBERSHIP_LABELS: &str = "membership_labels.jsonl";
    pub const TRUTH: &str = "truth.jsonl";
    pub const PREDICATES: &str = "predicates.jsonl";

    pub const BUILD_DIR: &str = "build";
    pub const ATTRIBUTES: &str = "attributes.json";
    pub const SUMMARIES: &str = "summaries.jsonl";
    pub const REVIEW_INDEX: &str = "review_index.json";
    pub const ENTITY_INDEX: &str = "entity_index.json";
    pub const VARIATION_INDEX: &str = "variation_index.json";
    pub const COOC_STATS: &str = "cooc_stats.json";
    pub const MODELS: &str = "models.json";
    pub const IDF: &str = "idf.json";
    pub const CLASSIFIED: &str = "extractions_classified.jsonl";
    pub const REPORT: &str = "report.json";
}

impl BuildInputs {
    pub fn load(data_dir: &Path) -> Result<Self> {
        let need = |name: &str| -> Result<PathBuf> {
            let p = data_dir.join(name);
            if p.exists() {
                Ok(p)
            } else {
                Err(Error::MissingArtifact(p.display().to_string()))
            }
        };
        let labels_path = data_dir.join(files::MEMBERSHIP_LABELS);
        Ok(BuildInputs {
            entities: read_jsonl(&need(files::ENTITIES)?)?,
            reviews: read_jsonl(&need(files::REVIEWS)?)?,
            extractions: read_jsonl(&need(files::EXTRACTIONS)?)?,
            schema: read_jsonl(&need(files::SCHEMA)?)?,
            emb: EmbeddingTable::load(&need(files::EMBEDDINGS)?)?,
            lex: SentimentLexicon::load(&need(files::LEXICON)?)?,
            membership_labels: if labels_path.exists() {
                read_jsonl(&labels_path)?
            } else {
                Vec::new()
            },
        })
    }

    fn bare_attributes(&self) -> Vec<SubjectiveAttribute> {
        self.schema
            .iter()
            .map(|record| SubjectiveAttribute {
                name: record.name.clone(),
                kind: record.kind,
                markers: Vec::new(),
                seeds: SeedSet {
                    attribute: record.name.clone(),
                    aspects: record.seeds.aspects.clone(),
                    opinions: record.seeds.opinions.clone(),
                },
            })
            .collect()
    }

    /// Schema validation over the raw inputs (markers not yet generated).
    pub fn validate(&self) -> ValidationReport {
        validate_schema(
            &self.bare_attributes(),
            &self.entities,
            &self.reviews,
            &self.extractions,
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub trained: bool,
    pub train_examples: usize,
    pub test_examples: usize,
    pub test_accuracy: Option<f64>,
    pub final_loss: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub entities: usize,
    pub reviews: usize,
    pub extractions: usize,
    pub classified: usize,
    pub unclassified: usize,
    pub markers_per_attribute: BTreeMap<String, usize>,
    /// Attributes whose linguistic domain was too small for markers.
    pub unmarked_attributes: Vec<String>,
    pub summaries: usize,
    pub skipped: SkipReport,
    pub membership: BTreeMap<String, ModelReport>,
    /// Test accuracy pooled over every attribute with a test split.
    pub membership_test_accuracy: Option<f64>,
}

/// The fully built, queryable database.
pub struct Database {
    pub config: Config,
    pub entities: Vec<Entity>,
    pub reviews: Vec<Review>,
    /// Classified extraction records, build order preserved.
    pub extractions: Vec<ExtractionRecord>,
    pub attributes: Vec<SubjectiveAttribute>,
    pub summaries: BTreeMap<(String, String), MarkerSummary>,
    pub review_index: InvertedIndex,
    pub entity_index: InvertedIndex,
    pub vindex: VariationIndex,
    pub cooc_stats: CoocStats,
    pub models: BTreeMap<String, MembershipModel>,
    pub emb: EmbeddingTable,
    pub idf: IdfTable,
    pub lex: SentimentLexicon,
    pub cache: InterpretationCache,
}

impl Database {
    pub fn build(inputs: BuildInputs, config: Config) -> Result<(Database, BuildReport)> {
        config.validate()?;
        let report = inputs.validate();
        if !report.is_empty() {
            return Err(Error::ValidationFailed(report.len()));
        }
        let mut build_report = BuildReport {
            entities: inputs.entities.len(),
            reviews: inputs.reviews.len(),
            extractions: inputs.extractions.len(),
            ..BuildReport::default()
        };

        // corpus statistics
        let review_docs: Vec<Vec<String>> = inputs
            .reviews
            .iter()
            .map(|r| tokenize(&r.text))
            .collect();
        let idf = build_idf(&review_docs)?;

        // seed expansion → labeled training set → nearest-centroid classifier
        let mut attributes = inputs.bare_attributes();
        let expanded: Vec<SeedSet> = attributes
            .iter()
            .map(|a| expand_seeds(&a.seeds, &inputs.emb, config.expand_per_seed))
            .collect();
        let training = build_training_set(&expanded);
        let centroids = build_centroids(&training, &inputs.emb, &idf);

        let mut extractions = inputs.extractions.clone();
        for record in &mut extractions {
            if record.attribute.is_none() {
                record.attribute = classify_attribute(
                    &record.phrase(),
                    &centroids,
                    &inputs.emb,
                    &idf,
                    config.reject_threshold,
                );
            }
        }
        build_report.classified = extractions.iter().filter(|r| r.attribute.is_some()).count();
        build_report.unclassified = extractions.len() - build_report.classified;

        // markers per attribute over its linguistic domain
        let domains = linguistic_domains(&extractions);
        for attribute in &mut attributes {
            let Some(domain) = domains.get(&attribute.name) else {
                build_report.unmarked_attributes.push(attribute.name.clone());
                continue;
            };
            let k = config.marker_k.min(domain.len());
            if k < 2 {
                build_report.unmarked_attributes.push(attribute.name.clone());
                continue;
            }
            attribute.markers = match attribute.kind {
                AttributeKind::LinearlyOrdered => {
                    generate_markers_linear(domain, k, &inputs.emb, &idf, &inputs.lex)?
                }
                AttributeKind::Categorical => generate_markers_categorical(
                    domain,
                    k,
                    &inputs.emb,
                    &idf,
                    &inputs.lex,
                    config.seed,
                )?,
            };
            build_report
                .markers_per_attribute
                .insert(attribute.name.clone(), attribute.markers.len());
        }
        // drop labels pointing at unmarked attributes from aggregation
        let marked: BTreeSet<&str> = attributes
            .iter()
            .filter(|a| !a.markers.is_empty())
            .map(|a| a.name.as_str())
            .collect();
        let mut aggregable = extractions.clone();
        for record in &mut aggregable {
            if let Some(attr) = &record.attribute {
                if !marked.contains(attr.as_str()) {
                    record.attribute = None;
                }
            }
        }

        // marker summaries
        let builder = SummaryBuilder::new(
            &attributes,
            &inputs.emb,
            &idf,
            &inputs.lex,
            &inputs.reviews,
            None,
        );
        let (summaries, skipped) = aggregate_summaries(&aggregable, &builder)?;
        build_report.summaries = summaries.len();
        build_report.skipped = skipped;

        // retrieval indexes
        let review_index = InvertedIndex::build(
            inputs
                .reviews
                .iter()
                .map(|r| (review_doc_id(&r.entity_id, &r.review_id), r.text.clone())),
        );
        let entity_index = InvertedIndex::build(
            build_entity_documents(&inputs.reviews)
                .into_iter()
                .map(|d| (d.entity_id, d.text)),
        );

        // interpretation structures
        let vindex = VariationIndex::build(&domains, &attributes, &inputs.emb, &idf);
        let cooc_stats = CoocStats::build(&extractions, inputs.reviews.len());

        let mut db = Database {
            config,
            entities: inputs.entities,
            reviews: inputs.reviews,
            extractions,
            attributes,
            summaries,
            review_index,
            entity_index,
            vindex,
            cooc_stats,
            models: BTreeMap::new(),
            emb: inputs.emb,
            idf,
            lex: inputs.lex,
            cache: InterpretationCache::new(),
        };
        db.train_models(&inputs.membership_labels, &mut build_report)?;
        Ok((db, build_report))
    }

    /// Train one membership model per labeled attribute (70/30 seeded
    /// split); attributes without usable labels keep a zero model that
    /// scores 0.5 everywhere.
    fn train_models(
        &mut self,
        labels: &[MembershipLabel],
        report: &mut BuildReport,
    ) -> Result<()> {
        let mut by_attr: BTreeMap<&str, Vec<&MembershipLabel>> = BTreeMap::new();
        for label in labels {
            by_attr.entry(label.attribute.as_str()).or_default().push(label);
        }
        let mut pooled_correct = 0usize;
        let mut pooled_total = 0usize;
        let attributes = self.attributes.clone();
        for attribute in &attributes {
            let mut model_report = ModelReport::default();
            let mut model =
                MembershipModel::zeroed(&attribute.name, membership::feature_len(attribute));
            if let Some(attr_labels) = by_attr.get(attribute.name.as_str()) {
                let mut examples = Vec::with_capacity(attr_labels.len());
                for label in attr_labels {
                    let Some(features) =
                        self.label_features(attribute, &label.entity_id, &label.phrase)
                    else {
                        continue;
                    };
                    examples.push(TrainingExample {
                        features,
                        label: label.label,
                    });
                }
                let mut order: Vec<usize> = (0..examples.len()).collect();
                let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
                order.shuffle(&mut rng);
                let test_len = examples.len() * 3 / 10;
                let (test_idx, train_idx) = order.split_at(test_len);
                let train: Vec<TrainingExample> =
                    train_idx.iter().map(|&i| examples[i].clone()).collect();
                let test: Vec<TrainingExample> =
                    test_idx.iter().map(|&i| examples[i].clone()).collect();
                model_report.train_examples = train.len();
                model_report.test_examples = test.len();
                match membership::train(&attribute.name, &train, &self.config.membership) {
                    Ok(outcome) => {
                        model = outcome.model;
                        model_report.trained = true;
                        model_report.final_loss = outcome.losses.last().copied();
                        if !test.is_empty() {
                            let correct = test
                                .iter()
                                .filter(|ex| (model.score(&ex.features) > 0.5) == ex.label)
                                .count();
                            model_report.test_accuracy = Some(correct as f64 / test.len() as f64);
                            pooled_correct += correct;
                            pooled_total += test.len();
                        }
                    }
                    Err(Error::DegenerateLabels) => {}
                    Err(e) => return Err(e),
                }
            }
            report.membership.insert(attribute.name.clone(), model_report);
            self.models.insert(attribute.name.clone(), model);
        }
        if pooled_total > 0 {
            report.membership_test_accuracy = Some(pooled_correct as f64 / pooled_total as f64);
        }
        Ok(())
    }

    /// Features for a labeled (entity, attribute, phrase) triple: the stored
    /// summary (or an empty one) against the attribute marker nearest to the
    /// phrase.
    pub fn label_features(
        &self,
        attribute: &SubjectiveAttribute,
        entity_id: &str,
        phrase: &str,
    ) -> Option<Vec<f64>> {
        if attribute.markers.is_empty() {
            return None;
        }
        let marker = self.nearest_marker_name(attribute, phrase);
        let key = (entity_id.to_string(), attribute.name.clone());
        let empty;
        let summary = match self.summaries.get(&key) {
            Some(s) => s,
            None => {
                empty = MarkerSummary::empty(entity_id, &attribute.name, self.emb.dim());
                &empty
            }
        };
        membership::featurize(summary, phrase, marker, attribute, &self.emb, &self.idf)
            .ok()
            .map(|f| f.values)
    }

    /// The attribute's marker whose embedding is closest to the phrase;
    /// falls back to the first marker for unrepresentable phrases.
    pub fn nearest_marker_name<'x>(
        &self,
        attribute: &'x SubjectiveAttribute,
        phrase: &str,
    ) -> &'x str {
        let fallback = attribute.markers[0].name.as_str();
        let Ok(phrase_rep) = rep(phrase, &self.emb, &self.idf) else {
            return fallback;
        };
        attribute
            .markers
            .iter()
            .max_by(|a, b| {
                crate::text::cosine(&phrase_rep, &a.embedding)
                    .total_cmp(&crate::text::cosine(&phrase_rep, &b.embedding))
            })
            .map(|m| m.name.as_str())
            .unwrap_or(fallback)
    }

    pub fn attribute(&self, name: &str) -> Option<&SubjectiveAttribute> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn interpreter_context(&self, w2v_threshold: f64) -> InterpreterContext<'_> {
        InterpreterContext {
            vindex: &self.vindex,
            review_index: &self.review_index,
            stats: &self.cooc_stats,
            attributes: &self.attributes,
            emb: &self.emb,
            idf: &self.idf,
            lex: &self.lex,
            w2v_threshold,
            cooc: self.config.cooc(),
        }
    }

    /// Interpretation through the shared cache at the configured threshold.
    pub fn interpret_cached(&self, predicate: &str) -> Interpretation {
        let ctx = self.interpreter_context(self.config.w2v_threshold);
        self.cache
            .get_or_insert_with(predicate, || ctx.interpret(predicate))
    }

    /// Direct embedding-stage attribute mapping, used by the harness.
    pub fn w2v_attribute(&self, predicate: &str, threshold: f64) -> Option<String> {
        interpret_w2v(predicate, &self.vindex, &self.emb, &self.idf, threshold)
            .map(|m| m.attribute)
    }

    /// Membership degree for one interpreted subjective condition; entities
    /// without evidence get the configured prior.
    pub fn subjective_degree(
        &self,
        entity_id: &str,
        attribute_name: &str,
        phrase: &str,
        marker: Option<&str>,
    ) -> Result<f64> {
        let Some(attribute) = self.attribute(attribute_name) else {
            return Ok(self.config.zero_evidence_prior);
        };
        if attribute.markers.is_empty() {
            return Ok(self.config.zero_evidence_prior);
        }
        let key = (entity_id.to_string(), attribute_name.to_string());
        let Some(summary) = self.summaries.get(&key) else {
            return Ok(self.config.zero_evidence_prior);
        };
        if summary.total == 0 {
            return Ok(self.config.zero_evidence_prior);
        }
        let marker_name = match marker {
            Some(m) if attribute.marker(m).is_some() => m,
            _ => self.nearest_marker_name(attribute, phrase),
        };
        let model = self
            .models
            .get(attribute_name)
            .expect("every attribute has a model after build");
        mf(
            model,
            summary,
            phrase,
            marker_name,
            attribute,
            &self.emb,
            &self.idf,
        )
    }

    /// Text-retrieval degree for a fallback predicate; entities without any
    /// review text score sigmoid(−c).
    pub fn fallback_degree(&self, entity_id: &str, predicate: &str, c: f64) -> Result<f64> {
        if !self.entity_index.contains(entity_id) {
            return Ok(sigmoid(-c));
        }
        crate::retrieval::text_retrieval_degree(&self.entity_index, entity_id, predicate, c)
    }

    /// Sigmoid offset for a fallback predicate: the configured constant, or
    /// the median nonzero BM25 score over entity documents (1.0 when no
    /// entity matches at all).
    pub fn resolve_sigmoid_c(&self, predicate: &str) -> f64 {
        if let Some(c) = self.config.sigmoid_c {
            return c;
        }
        self.entity_index
            .median_nonzero_bm25(&tokenize(predicate))
            .unwrap_or(1.0)
    }

    pub fn save(&self, build_dir: &Path) -> Result<()> {
        std::fs::create_dir_all(build_dir)?;
        fn json<T: serde::Serialize>(path: PathBuf, value: &T) -> Result<()> {
            let file = std::fs::File::create(path)?;
            serde_json::to_writer(std::io::BufWriter::new(file), value)?;
            Ok(())
        }
        json(build_dir.join(files::ATTRIBUTES), &self.attributes)?;
        let summaries: Vec<&MarkerSummary> = self.summaries.values().collect();
        write_jsonl(&build_dir.join(files::SUMMARIES), &summaries)?;
        self.review_index.save(&build_dir.join(files::REVIEW_INDEX))?;
        self.entity_index.save(&build_dir.join(files::ENTITY_INDEX))?;
        json(build_dir.join(files::VARIATION_INDEX), &self.vindex)?;
        json(build_dir.join(files::COOC_STATS), &self.cooc_stats)?;
        let models: Vec<&MembershipModel> = self.models.values().collect();
        json(build_dir.join(files::MODELS), &models)?;
        json(build_dir.join(files::IDF), &self.idf)?;
        write_jsonl(&build_dir.join(files::CLASSIFIED), &self.extractions)?;
        Ok(())
    }

    /// Reload a built database: raw inputs from `data_dir`, artifacts from
    /// `build_dir`.
    pub fn load(data_dir: &Path, build_dir: &Path, config: Config) -> Result<Database> {
        config.validate()?;
        let need = |name: &str| -> Result<PathBuf> {
            let p = build_dir.join(name);
            if p.exists() {
                Ok(p)
            } else {
                Err(Error::MissingArtifact(p.display().to_string()))
            }
        };
        let read_json = |p: PathBuf| -> Result<serde_json::Value> {
            Ok(serde_json::from_reader(std::io::BufReader::new(
                std::fs::File::open(p)?,
            ))?)
        };
        let inputs = BuildInputs::load(data_dir)?;
        let attributes: Vec<SubjectiveAttribute> =
            serde_json::from_value(read_json(need(files::ATTRIBUTES)?)?)?;
        let summaries_vec: Vec<MarkerSummary> = read_jsonl(&need(files::SUMMARIES)?)?;
        let summaries = summaries_vec
            .into_iter()
            .map(|s| ((s.entity_id.clone(), s.attribute.clone()), s))
            .collect();
        let models_vec: Vec<MembershipModel> =
            serde_json::from_value(read_json(need(files::MODELS)?)?)?;
        Ok(Database {
            config,
            entities: inputs.entities,
            reviews: inputs.reviews,
            extractions: read_jsonl(&need(files::CLASSIFIED)?)?,
            attributes,
            summaries,
            review_index: InvertedIndex::load(&need(files::REVIEW_INDEX)?)?,
            entity_index: InvertedIndex::load(&need(files::ENTITY_INDEX)?)?,
            vindex: serde_json::from_value(read_json(need(files::VARIATION_INDEX)?)?)?,
            cooc_stats: serde_json::from_value(read_json(need(files::COOC_STATS)?)?)?,
            models: models_vec
                .into_iter()
                .map(|m| (m.attribute.clone(), m))
                .collect(),
            emb: inputs.emb,
            idf: serde_json::from_value(read_json(need(files::IDF)?)?)?,
            lex: inputs.lex,
            cache: InterpretationCache::new(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn database_is_shareable_across_threads() {
        fn assert_sync<T: Send + Sync>() {}
        assert_sync::<Database>();
    }
}
