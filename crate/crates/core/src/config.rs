//! Engine settings. Every constant the pipeline depends on lives here so a
//! single TOML file (plus CLI flag overrides) pins the whole run.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interpreter::CoocConfig;
use crate::membership::TrainConfig;
use crate::query::Variant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    /// Single seed feeding every random choice (k-means init, corpus
    /// generation, label splits).
    pub seed: u64,
    /// Relation name queries must reference in `from`.
    pub relation: String,
    /// Embedding-method acceptance threshold inside `interpret`.
    pub w2v_threshold: f64,
    /// Stricter gate the evaluation harness uses before falling back to text
    /// retrieval.
    pub combined_threshold: f64,
    pub cooc_k: usize,
    pub cooc_n: usize,
    pub cooc_conj_threshold: f64,
    pub cooc_score_threshold: f64,
    pub fuzzy_variant: Variant,
    /// Markers generated per subjective attribute.
    pub marker_k: usize,
    /// Embedding neighbors added per seed term during seed expansion.
    pub expand_per_seed: usize,
    /// Classifier rejection threshold; phrases below it stay unassigned.
    pub reject_threshold: f64,
    /// Degree of truth reported for entities with an empty summary.
    pub zero_evidence_prior: f64,
    /// Sigmoid offset for the text-retrieval degree; when absent the median
    /// nonzero BM25 score over entity documents for the query is used.
    pub sigmoid_c: Option<f64>,
    /// Result size when the query does not say otherwise.
    pub top_k: usize,
    /// Per-condition threshold for the hard-constraint baseline.
    pub hard_threshold: f64,
    pub membership: TrainConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 42,
            relation: "entities".into(),
            w2v_threshold: 0.5,
            combined_threshold: 0.8,
            cooc_k: 50,
            cooc_n: 2,
            cooc_conj_threshold: 0.5,
            cooc_score_threshold: 3.0,
            fuzzy_variant: Variant::Product,
            marker_k: 10,
            expand_per_seed: 3,
            reject_threshold: 0.2,
            zero_evidence_prior: 0.3,
            sigmoid_c: None,
            top_k: 10,
            hard_threshold: 0.5,
            membership: TrainConfig::default(),
        }
    }
}

impl Config {
    pub fn cooc(&self) -> CoocConfig {
        CoocConfig {
            k: self.cooc_k,
            n: self.cooc_n,
            conj_threshold: self.cooc_conj_threshold,
            score_threshold: self.cooc_score_threshold,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} outside [0, 1]")))
            }
        };
        unit("w2v_threshold", self.w2v_threshold)?;
        unit("combined_threshold", self.combined_threshold)?;
        unit("cooc_conj_threshold", self.cooc_conj_threshold)?;
        unit("reject_threshold", self.reject_threshold)?;
        unit("zero_evidence_prior", self.zero_evidence_prior)?;
        unit("hard_threshold", self.hard_threshold)?;
        if self.cooc_k == 0 || self.cooc_n == 0 {
            return Err(Error::Config("cooc_k and cooc_n must be positive".into()));
        }
        if self.marker_k < 2 {
            return Err(Error::Config("marker_k must be at least 2".into()));
        }
        if self.top_k == 0 {
            return Err(Error::Config("top_k must be positive".into()));
        }
        if self.cooc_score_threshold < 0.0 {
            return Err(Error::Config("cooc_score_threshold must be non-negative".into()));
        }
        if self.membership.learning_rate <= 0.0 || self.membership.l2 < 0.0 {
            return Err(Error::Config("bad membership hyperparameters".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: Config =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}
