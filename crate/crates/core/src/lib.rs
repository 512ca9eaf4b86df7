//! sentiq — a query engine for subjective data mined from reviews.
//!
//! Reviews are reduced to (aspect, opinion) extraction pairs, classified onto a
//! designer-provided schema of subjective attributes, and aggregated per entity
//! into marker summaries (histograms over representative phrases). Free-text
//! query predicates are interpreted against that schema and combined with fuzzy
//! logic to rank entities by a degree of truth in [0, 1].
//!
//! Module map:
//! * [`model`] — domain types (entities, reviews, extractions, attributes,
//!   markers, summaries, fuzzy expressions) and schema validation.
//! * [`text`] — tokenization, embeddings, IDF, phrase representation,
//!   similarity, lexicon sentiment.
//! * [`retrieval`] — inverted index, BM25, sentiment-weighted review search,
//!   text-retrieval degrees of truth.
//! * [`schema_builder`] — seed expansion, attribute classification, marker
//!   generation, summary aggregation.
//! * [`interpreter`] — free-text predicate interpretation (embedding match,
//!   co-occurrence, text-retrieval fallback) and the budgeted
//!   rewriter-selection optimizer.
//! * [`membership`] — logistic-regression membership functions over summary
//!   features.
//! * [`query`] — the SQL-like query dialect, fuzzy combination, ranked
//!   evaluation.
//! * [`synth`] — deterministic synthetic corpus generator with planted ground
//!   truth.
//! * [`eval`] — quality metrics, baselines, and the summary-vs-raw timing
//!   comparison.
//! * [`db`] / [`config`] — end-to-end build pipeline, persistence, settings.

pub mod config;
pub mod db;
pub mod error;
pub mod eval;
pub mod interpreter;
pub mod membership;
pub mod model;
pub mod query;
pub mod retrieval;
pub mod schema_builder;
pub mod synth;
pub mod text;

pub use error::{Error, Result};
