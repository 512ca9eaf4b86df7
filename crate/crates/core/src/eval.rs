//! Quality metrics (discounted satisfaction, its per-query optimum, workload
//! quality), the retrieval and hard-threshold baselines, workload
//! construction, and the summary-path vs raw-extraction-path timing
//! comparison.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::db::Database;
use crate::error::{Error, Result};
use crate::membership;
use crate::model::{read_jsonl, FuzzyExpr, InterpretationBody, MarkerSummary};
use crate::query::{evaluate, evaluate_hard, SubjectiveQuery};
use crate::retrieval::InvertedIndex;
use crate::schema_builder::SummaryBuilder;
use crate::synth::{ProbePredicate, TruthRecord};
use crate::text::tokenize;

/// Total sat(q, e) relation over a benchmark's predicate × entity grid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    sat: BTreeMap<(String, String), bool>,
    entities: BTreeSet<String>,
}

impl GroundTruth {
    pub fn from_records(records: &[TruthRecord]) -> Self {
        let mut truth = GroundTruth::default();
        for r in records {
            truth
                .sat
                .insert((r.predicate.clone(), r.entity_id.clone()), r.sat);
            truth.entities.insert(r.entity_id.clone());
        }
        truth
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self::from_records(&read_jsonl::<TruthRecord>(path)?))
    }

    pub fn get(&self, predicate: &str, entity: &str) -> Result<bool> {
        self.sat
            .get(&(predicate.to_string(), entity.to_string()))
            .copied()
            .ok_or_else(|| Error::MissingTruth {
                predicate: predicate.to_string(),
                entity: entity.to_string(),
            })
    }

    pub fn entities(&self) -> impl Iterator<Item = &str> {
        self.entities.iter().map(|s| s.as_str())
    }
}

/// Discounted satisfaction of a ranked result: the entity at 1-based rank j
/// contributes its satisfied-predicate count divided by log2(j + 1).
pub fn sat_score(predicates: &[String], ranked: &[String], truth: &GroundTruth) -> Result<f64> {
    let mut score = 0.0;
    for (j, entity) in ranked.iter().enumerate() {
        let mut satisfied = 0u64;
        for p in predicates {
            satisfied += u64::from(truth.get(p, entity)?);
        }
        score += satisfied as f64 / ((j + 2) as f64).log2();
    }
    Ok(score)
}

/// Best achievable sat over any k entities: order by per-entity satisfied
/// count descending (greedy is optimal by an exchange argument), apply the
/// discounted sum.
pub fn sat_max(predicates: &[String], truth: &GroundTruth, k: usize) -> Result<f64> {
    let mut counts: Vec<(u64, &str)> = Vec::new();
    for entity in truth.entities() {
        let mut satisfied = 0u64;
        for p in predicates {
            satisfied += u64::from(truth.get(p, entity)?);
        }
        counts.push((satisfied, entity));
    }
    counts.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    Ok(counts
        .iter()
        .take(k)
        .enumerate()
        .map(|(j, (satisfied, _))| *satisfied as f64 / ((j + 2) as f64).log2())
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkloadQuality {
    /// Mean of sat / sat-max over the scored queries.
    pub quality: f64,
    /// Queries dropped because nothing in the grid satisfies them.
    pub excluded: usize,
}

/// Mean normalized satisfaction over a workload. Queries whose sat-max is
/// zero cannot be scored and are excluded (and counted).
pub fn workload_quality(
    queries: &[Vec<String>],
    results: &[Vec<String>],
    truth: &GroundTruth,
    k: usize,
) -> Result<WorkloadQuality> {
    assert_eq!(queries.len(), results.len());
    let mut total = 0.0;
    let mut scored = 0usize;
    let mut excluded = 0usize;
    for (query, result) in queries.iter().zip(results) {
        let best = sat_max(query, truth, k)?;
        if best == 0.0 {
            excluded += 1;
            continue;
        }
        total += sat_score(query, result, truth)? / best;
        scored += 1;
    }
    Ok(WorkloadQuality {
        quality: if scored == 0 { 0.0 } else { total / scored as f64 },
        excluded,
    })
}

/// Keyword baseline: rank entities by the sum of BM25 scores of their
/// concatenated-review document against each predicate. Ties break by
/// entity id; zero-scoring entities still fill out the top-k.
pub fn ir_baseline(
    predicates: &[String],
    entity_index: &InvertedIndex,
    k: usize,
) -> Vec<(String, f64)> {
    let token_lists: Vec<Vec<String>> = predicates.iter().map(|p| tokenize(p)).collect();
    let mut scored: Vec<(String, f64)> = entity_index
        .doc_ids()
        .map(|id| {
            let score: f64 = token_lists
                .iter()
                .map(|tokens| entity_index.bm25(id, tokens).unwrap_or(0.0))
                .sum();
            (id.to_string(), score)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub name: String,
    pub queries: Vec<Vec<String>>,
}

/// Uniformly sample `queries_per_set` conjunctions of `size` distinct probe
/// predicates for each (name, size) pair. Co-occurrence probes participate
/// like any other predicate.
pub fn build_workloads(
    probes: &[ProbePredicate],
    sets: &[(&str, usize)],
    queries_per_set: usize,
    seed: u64,
) -> Vec<Workload> {
    let texts: Vec<&str> = probes.iter().map(|p| p.text.as_str()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sets.iter()
        .map(|(name, size)| {
            let size = (*size).min(texts.len());
            let queries = (0..queries_per_set)
                .map(|_| {
                    let mut pool = texts.clone();
                    pool.shuffle(&mut rng);
                    pool.truncate(size);
                    pool.into_iter().map(|s| s.to_string()).collect()
                })
                .collect();
            Workload {
                name: name.to_string(),
                queries,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: String,
    pub workload: String,
    pub quality: f64,
    pub excluded: usize,
    pub runtime_ms: f64,
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("method,workload,quality,excluded,runtime_ms\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.4},{},{:.1}\n",
            r.method, r.workload, r.quality, r.excluded, r.runtime_ms
        ));
    }
    out
}

/// Run the engine, the IR baseline, and the hard-threshold baseline over
/// each workload and score them against the ground truth. Uses the
/// database's configured fuzzy variant, top-k, and interpretation
/// thresholds.
pub fn run_benchmark(
    db: &Database,
    workloads: &[Workload],
    truth: &GroundTruth,
) -> Result<Vec<BenchRow>> {
    let k = db.config.top_k;
    let variant = db.config.fuzzy_variant;
    let hard_thresholds = BTreeMap::new();
    let mut rows = Vec::new();
    for workload in workloads {
        let mut engine_results = Vec::with_capacity(workload.queries.len());
        let mut ir_results = Vec::with_capacity(workload.queries.len());
        let mut hard_results = Vec::with_capacity(workload.queries.len());

        let start = Instant::now();
        for predicates in &workload.queries {
            let query = SubjectiveQuery::conjunction(&db.config.relation, predicates);
            let ranked = evaluate(db, &query, k, variant)?;
            engine_results.push(ranked.rows.into_iter().map(|r| r.entity_id).collect::<Vec<_>>());
        }
        let engine_ms = start.elapsed().as_secs_f64() * 1e3;

        let start = Instant::now();
        for predicates in &workload.queries {
            ir_results.push(
                ir_baseline(predicates, &db.entity_index, k)
                    .into_iter()
                    .map(|(id, _)| id)
                    .collect::<Vec<_>>(),
            );
        }
        let ir_ms = start.elapsed().as_secs_f64() * 1e3;

        let start = Instant::now();
        for predicates in &workload.queries {
            let query = SubjectiveQuery::conjunction(&db.config.relation, predicates);
            let ranked = evaluate_hard(
                db,
                &query,
                &hard_thresholds,
                db.config.hard_threshold,
                k,
                variant,
            )?;
            hard_results.push(ranked.rows.into_iter().map(|r| r.entity_id).collect::<Vec<_>>());
        }
        let hard_ms = start.elapsed().as_secs_f64() * 1e3;

        for (method, results, runtime_ms) in [
            ("engine", &engine_results, engine_ms),
            ("ir", &ir_results, ir_ms),
            ("hard", &hard_results, hard_ms),
        ] {
            let wq = workload_quality(&workload.queries, results, truth, k)?;
            rows.push(BenchRow {
                method: method.to_string(),
                workload: workload.name.clone(),
                quality: wq.quality,
                excluded: wq.excluded,
                runtime_ms,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub summary_path_ms: f64,
    pub raw_path_ms: f64,
    pub speedup: f64,
    pub rankings_match: bool,
    /// Predicates that resolved to a single marker condition and were timed.
    pub terms: usize,
}

/// Compare scoring through the precomputed marker summaries against scoring
/// that rebuilds each (entity, attribute) summary from the raw extraction
/// records on every query. Both paths produce the same features, so their
/// rankings must agree; the summary path only skips the re-aggregation.
pub fn timing_compare(db: &Database, predicates: &[String]) -> Result<TimingReport> {
    // resolve predicates up front; interpretation cost is shared by both paths
    let mut terms: Vec<(String, String, String)> = Vec::new();
    for predicate in predicates {
        let interp = db.interpret_cached(predicate);
        if let InterpretationBody::MarkerExpr(FuzzyExpr::Subjective {
            attribute,
            phrase,
            marker: Some(marker),
        }) = &interp.body
        {
            terms.push((attribute.clone(), phrase.clone(), marker.clone()));
        }
    }
    let mut by_entity: BTreeMap<&str, Vec<&crate::model::ExtractionRecord>> = BTreeMap::new();
    for record in &db.extractions {
        by_entity.entry(record.entity_id.as_str()).or_default().push(record);
    }
    let builder = SummaryBuilder::new(&db.attributes, &db.emb, &db.idf, &db.lex, &db.reviews, None);

    // summary path: features straight from the stored aggregates
    let start = Instant::now();
    let mut summary_rankings = Vec::with_capacity(terms.len());
    for (attribute_name, phrase, marker) in &terms {
        let attribute = db.attribute(attribute_name).expect("interpreted attribute exists");
        let model = &db.models[attribute_name];
        let mut ranking: Vec<(String, f64)> = Vec::with_capacity(db.entities.len());
        for entity in &db.entities {
            let key = (entity.id.clone(), attribute_name.clone());
            let empty;
            let summary = match db.summaries.get(&key) {
                Some(s) => s,
                None => {
                    empty = MarkerSummary::empty(&entity.id, attribute_name, db.emb.dim());
                    &empty
                }
            };
            let features =
                membership::featurize(summary, phrase, marker, attribute, &db.emb, &db.idf)?;
            ranking.push((entity.id.clone(), model.score(&features.values)));
        }
        ranking.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        summary_rankings.push(ranking);
    }
    let summary_path_ms = start.elapsed().as_secs_f64() * 1e3;

    // raw path: rebuild the summary from extraction records per query term
    let start = Instant::now();
    let mut raw_rankings = Vec::with_capacity(terms.len());
    for (attribute_name, phrase, marker) in &terms {
        let attribute = db.attribute(attribute_name).expect("interpreted attribute exists");
        let model = &db.models[attribute_name];
        let mut ranking: Vec<(String, f64)> = Vec::with_capacity(db.entities.len());
        for entity in &db.entities {
            let mut summary = builder.new_summary(&entity.id, attribute_name);
            if let Some(records) = by_entity.get(entity.id.as_str()) {
                for record in records {
                    if record.attribute.as_deref() == Some(attribute_name.as_str()) {
                        builder.update_summary(&mut summary, record)?;
                    }
                }
            }
            let features =
                membership::featurize(&summary, phrase, marker, attribute, &db.emb, &db.idf)?;
            ranking.push((entity.id.clone(), model.score(&features.values)));
        }
        ranking.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        raw_rankings.push(ranking);
    }
    let raw_path_ms = start.elapsed().as_secs_f64() * 1e3;

    let rankings_match = summary_rankings
        .iter()
        .zip(&raw_rankings)
        .all(|(a, b)| {
            a.iter()
                .zip(b)
                .all(|((ea, _), (eb, _))| ea == eb)
        });
    Ok(TimingReport {
        summary_path_ms,
        raw_path_ms,
        speedup: if summary_path_ms > 0.0 {
            raw_path_ms / summary_path_ms
        } else {
            f64::INFINITY
        },
        rankings_match,
        terms: terms.len(),
    })
}

/// Accuracy of predicate → attribute mapping for the embedding stage alone
/// and for the full chain, measured over labeled probes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterpreterAccuracy {
    pub w2v_only: f64,
    pub combined: f64,
    pub probes: usize,
}

pub fn interpreter_accuracy(
    db: &Database,
    probes: &[ProbePredicate],
    w2v_threshold: f64,
) -> InterpreterAccuracy {
    let ctx = db.interpreter_context(w2v_threshold);
    let mut w2v_correct = 0usize;
    let mut combined_correct = 0usize;
    for probe in probes {
        if db.w2v_attribute(&probe.text, w2v_threshold).as_deref() == Some(probe.attribute.as_str())
        {
            w2v_correct += 1;
        }
        let interp = ctx.interpret(&probe.text);
        let top = match &interp.body {
            InterpretationBody::MarkerExpr(expr) => first_attribute(expr),
            InterpretationBody::TextFallback(_) => None,
        };
        if top.as_deref() == Some(probe.attribute.as_str()) {
            combined_correct += 1;
        }
    }
    InterpreterAccuracy {
        w2v_only: w2v_correct as f64 / probes.len() as f64,
        combined: combined_correct as f64 / probes.len() as f64,
        probes: probes.len(),
    }
}

fn first_attribute(expr: &FuzzyExpr) -> Option<String> {
    match expr {
        FuzzyExpr::Subjective { attribute, .. } => Some(attribute.clone()),
        FuzzyExpr::And(children) | FuzzyExpr::Or(children) => {
            children.first().and_then(first_attribute)
        }
        FuzzyExpr::Not(child) => first_attribute(child),
        FuzzyExpr::Objective { .. } => None,
    }
}

/// Fraction of probes the embedding stage answers without the exhaustive
/// scan, plus agreement of the fast path with a forced scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FastPathReport {
    pub probes: usize,
    pub avoided_scan: usize,
    pub agreements: usize,
    /// Probes where the embedding stage produced a match at all.
    pub matched: usize,
}

pub fn fast_path_report(db: &Database, probes: &[ProbePredicate], threshold: f64) -> FastPathReport {
    use crate::interpreter::{interpret_w2v, LookupPath};
    let mut scanless = db.vindex.clone();
    let mut report = FastPathReport {
        probes: probes.len(),
        avoided_scan: 0,
        agreements: 0,
        matched: 0,
    };
    // a copy of the index with substitutions removed forces the scan path
    scanless_clear(&mut scanless);
    for probe in probes {
        let fast = interpret_w2v(&probe.text, &db.vindex, &db.emb, &db.idf, threshold);
        let slow = interpret_w2v(&probe.text, &scanless, &db.emb, &db.idf, threshold);
        if let Some(fast) = &fast {
            report.matched += 1;
            if fast.path != LookupPath::Scan {
                report.avoided_scan += 1;
            }
        }
        let agree = match (&fast, &slow) {
            (Some(f), Some(s)) => {
                f.attribute == s.attribute && (f.similarity - s.similarity).abs() <= 1e-12
            }
            (None, None) => true,
            _ => false,
        };
        if agree {
            report.agreements += 1;
        }
    }
    report
}

fn scanless_clear(vindex: &mut crate::interpreter::VariationIndex) {
    // serialize-deserialize round trip with the substitution table dropped
    let mut value = serde_json::to_value(&*vindex).expect("index serializes");
    if let Some(map) = value.get_mut("substitution").and_then(|v| v.as_object_mut()) {
        map.clear();
    }
    *vindex = serde_json::from_value(value).expect("index deserializes");
}
