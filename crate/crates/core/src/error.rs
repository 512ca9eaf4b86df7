//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// No token of the phrase has an embedding vector; callers are expected
    /// to skip the phrase or fall back to another method.
    #[error("no token of {0:?} is in the embedding vocabulary")]
    AllTokensOutOfVocabulary(String),

    #[error("cannot build an IDF table from an empty corpus")]
    EmptyCorpus,

    #[error("document {0:?} is not indexed")]
    UnknownDocument(String),

    #[error("entity {0:?} has no indexed document")]
    UnknownEntity(String),

    #[error("linguistic domain has {len} phrases, need at least {k}")]
    DomainTooSmall { len: usize, k: usize },

    #[error("expected attribute {expected:?}, got {got:?}")]
    AttributeMismatch { expected: String, got: String },

    #[error("training set contains a single label class")]
    DegenerateLabels,

    #[error("no rewriter combination fits within the {0} ms budget")]
    Infeasible(u64),

    #[error("syntax error at position {position}: expected {expected}, found {found}")]
    Syntax {
        position: usize,
        expected: String,
        found: String,
    },

    #[error("unknown relation {0:?}")]
    UnknownRelation(String),

    #[error("unknown objective attribute {0:?}")]
    UnknownObjectiveAttribute(String),

    #[error("fuzzy operand {0} is outside [0, 1]")]
    FuzzyDomain(f64),

    #[error("missing ground truth for predicate {predicate:?}, entity {entity:?}")]
    MissingTruth { predicate: String, entity: String },

    #[error("invalid corpus spec: {0}")]
    InvalidSpec(String),

    #[error("schema validation failed with {0} violation(s)")]
    ValidationFailed(usize),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("missing artifact {0:?}; run `sentiq build` first")]
    MissingArtifact(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
