//! Logistic-regression membership functions: map a (marker summary,
//! interpreted predicate) pair to a degree of truth in (0, 1). Features come
//! entirely from precomputed summary fields so scoring never touches raw
//! extraction records.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MarkerSummary, SubjectiveAttribute};
use crate::retrieval::sigmoid;
use crate::text::{cosine, rep, EmbeddingTable, IdfTable};

pub const FEATURE_LAYOUT_VERSION: u32 = 1;

/// Fixed-order features for an attribute with K markers (length K + 5):
/// count fraction per marker, log(1 + total), average sentiment,
/// cos(rep(query), summary centroid), cos(rep(query), marker embedding),
/// and the interpreted marker's count fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    /// Set when the query phrase had no in-vocabulary token, in which case
    /// both cosine features are zero.
    pub query_oov: bool,
}

pub fn feature_len(attribute: &SubjectiveAttribute) -> usize {
    attribute.markers.len() + 5
}

/// Build the feature vector for one (summary, query phrase, marker) triple.
/// A total = 0 summary yields all-zero features.
pub fn featurize(
    summary: &MarkerSummary,
    phrase: &str,
    marker_name: &str,
    attribute: &SubjectiveAttribute,
    emb: &EmbeddingTable,
    idf: &IdfTable,
) -> Result<FeatureVector> {
    if summary.attribute != attribute.name {
        return Err(Error::AttributeMismatch {
            expected: attribute.name.clone(),
            got: summary.attribute.clone(),
        });
    }
    let marker = attribute
        .marker(marker_name)
        .ok_or_else(|| Error::AttributeMismatch {
            expected: format!("a marker of {}", attribute.name),
            got: marker_name.to_string(),
        })?;
    let mut values = Vec::with_capacity(feature_len(attribute));
    for m in &attribute.markers {
        values.push(summary.fraction(&m.name));
    }
    values.push((1.0 + summary.total as f64).ln());
    values.push(summary.avg_sentiment);
    let (cos_centroid, cos_marker, query_oov) = match rep(phrase, emb, idf) {
        Ok(query_rep) => {
            let cos_centroid = if summary.total == 0 {
                0.0
            } else {
                cosine(&query_rep, &summary.centroid)
            };
            (cos_centroid, cosine(&query_rep, &marker.embedding), false)
        }
        Err(_) => (0.0, 0.0, true),
    };
    values.push(cos_centroid);
    values.push(cos_marker);
    values.push(summary.fraction(marker_name));
    Ok(FeatureVector { values, query_oov })
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MembershipModel {
    pub attribute: String,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub feature_layout_version: u32,
}

impl MembershipModel {
    pub fn zeroed(attribute: &str, feature_len: usize) -> Self {
        Self {
            attribute: attribute.to_string(),
            weights: vec![0.0; feature_len],
            bias: 0.0,
            feature_layout_version: FEATURE_LAYOUT_VERSION,
        }
    }

    /// sigmoid(w·x + b); strictly inside (0, 1) for finite weights.
    pub fn score(&self, features: &[f64]) -> f64 {
        let z: f64 = self
            .weights
            .iter()
            .zip(features)
            .map(|(w, x)| w * x)
            .sum::<f64>()
            + self.bias;
        sigmoid(z)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}

/// Degree of truth of `phrase`/`marker` against the entity summary.
pub fn mf(
    model: &MembershipModel,
    summary: &MarkerSummary,
    phrase: &str,
    marker_name: &str,
    attribute: &SubjectiveAttribute,
    emb: &EmbeddingTable,
    idf: &IdfTable,
) -> Result<f64> {
    if model.attribute != attribute.name {
        return Err(Error::AttributeMismatch {
            expected: attribute.name.clone(),
            got: model.attribute.clone(),
        });
    }
    let features = featurize(summary, phrase, marker_name, attribute, emb, idf)?;
    Ok(model.score(&features.values))
}

/// One training example with features already built.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub features: Vec<f64>,
    pub label: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 500,
            l2: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MembershipModel,
    /// Mean regularized logistic loss after each epoch.
    pub losses: Vec<f64>,
}

/// softplus(z) = ln(1 + e^z), stable at both tails.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean L2-regularized logistic loss over a batch (bias unregularized).
/// Per example the loss softplus(z) − y·z is computed in the equivalent
/// cancellation-free form softplus((1 − 2y)·z), which stays accurate deep
/// into saturation.
pub fn loss(model: &MembershipModel, examples: &[TrainingExample], l2: f64) -> f64 {
    let m = examples.len() as f64;
    let mut total = 0.0;
    for ex in examples {
        let z: f64 = model
            .weights
            .iter()
            .zip(&ex.features)
            .map(|(w, x)| w * x)
            .sum::<f64>()
            + model.bias;
        let sign = 1.0 - 2.0 * f64::from(ex.label);
        total += softplus(sign * z);
    }
    total / m + 0.5 * l2 * model.weights.iter().map(|w| w * w).sum::<f64>()
}

/// Analytic gradient of `loss` with respect to (weights, bias).
pub fn gradient(
    model: &MembershipModel,
    examples: &[TrainingExample],
    l2: f64,
) -> (Vec<f64>, f64) {
    let m = examples.len() as f64;
    let mut grad_w = vec![0.0; model.weights.len()];
    let mut grad_b = 0.0;
    for ex in examples {
        let p = model.score(&ex.features);
        let err = p - f64::from(ex.label);
        for (g, x) in grad_w.iter_mut().zip(&ex.features) {
            *g += err * x;
        }
        grad_b += err;
    }
    for (g, w) in grad_w.iter_mut().zip(&model.weights) {
        *g = *g / m + l2 * w;
    }
    (grad_w, grad_b / m)
}

/// Full-batch gradient descent from zero-initialized weights. Deterministic
/// for fixed inputs; the seed exists for API symmetry with stochastic
/// variants and does not change the result.
pub fn train(
    attribute: &str,
    examples: &[TrainingExample],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let positives = examples.iter().filter(|e| e.label).count();
    if positives == 0 || positives == examples.len() {
        return Err(Error::DegenerateLabels);
    }
    let feature_len = examples[0].features.len();
    let mut model = MembershipModel::zeroed(attribute, feature_len);
    let mut losses = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let (grad_w, grad_b) = gradient(&model, examples, config.l2);
        for (w, g) in model.weights.iter_mut().zip(&grad_w) {
            *w -= config.learning_rate * g;
        }
        model.bias -= config.learning_rate * grad_b;
        losses.push(loss(&model, examples, config.l2));
    }
    Ok(TrainOutcome { model, losses })
}

/// Compare the analytic gradient against central finite differences on one
/// example; returns the maximum relative error across coordinates.
pub fn gradient_check(model: &MembershipModel, example: &TrainingExample, epsilon: f64) -> f64 {
    assert!(epsilon > 0.0);
    let batch = std::slice::from_ref(example);
    let l2 = 1e-4;
    let (grad_w, grad_b) = gradient(model, batch, l2);
    let mut max_rel = 0.0f64;
    let mut check = |analytic: f64, perturb: &mut dyn FnMut(&mut MembershipModel, f64)| {
        let mut plus = model.clone();
        perturb(&mut plus, epsilon);
        let mut minus = model.clone();
        perturb(&mut minus, -epsilon);
        let numeric = (loss(&plus, batch, l2) - loss(&minus, batch, l2)) / (2.0 * epsilon);
        let denom = analytic.abs().max(numeric.abs()).max(1e-8);
        max_rel = max_rel.max((analytic - numeric).abs() / denom);
    };
    for (i, g) in grad_w.iter().enumerate() {
        check(*g, &mut |m, eps| m.weights[i] += eps);
    }
    check(grad_b, &mut |m, eps| m.bias += eps);
    max_rel
}
