//! Tokenization, embeddings, IDF statistics, phrase representation,
//! similarity, and lexicon-based sentiment — the numeric substrate for
//! interpretation and aggregation.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tokens that flip the sign of the next scored token.
pub const NEGATORS: [&str; 3] = ["not", "no", "never"];

/// Lowercase alphanumeric tokens, punctuation stripped, order preserved.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            for lc in ch.to_lowercase() {
                current.push(lc);
            }
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Canonical form of a phrase: tokenized and re-joined with single spaces.
pub fn normalize(text: &str) -> String {
    tokenize(text).join(" ")
}

/// Token → dense vector map. All vectors share one dimension and tokens are
/// stored lowercase.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self {
            dim,
            vectors: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, token: &str, vector: Vec<f64>) {
        assert_eq!(vector.len(), self.dim, "vector length must match dim");
        self.vectors.insert(token.to_lowercase(), vector);
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(|v| v.as_slice())
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vectors.contains_key(token)
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.vectors.keys().map(|s| s.as_str())
    }

    /// Text format: one token per line, `token v1 … vd` space-separated.
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let reader = BufReader::new(file);
        let mut table: Option<EmbeddingTable> = None;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let token = parts.next().unwrap().to_string();
            let values: Vec<f64> = parts
                .map(|p| p.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    message: format!("bad embedding value: {e}"),
                })?;
            if values.is_empty() {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    message: "embedding line has no values".into(),
                });
            }
            let table = table.get_or_insert_with(|| EmbeddingTable::new(values.len()));
            if values.len() != table.dim {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    message: format!(
                        "dimension mismatch: expected {}, got {}",
                        table.dim,
                        values.len()
                    ),
                });
            }
            table.insert(&token, values);
        }
        table.ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            line: 0,
            message: "embedding file is empty".into(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for (token, vec) in &self.vectors {
            write!(out, "{token}")?;
            for v in vec {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Document-frequency statistics with smoothed inverse document frequency:
/// idf(w) = ln((N + 1) / (df(w) + 1)) + 1, which stays strictly positive and
/// is defined for unseen tokens (df = 0).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct IdfTable {
    doc_count: usize,
    df: BTreeMap<String, usize>,
}

impl IdfTable {
    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn df(&self, token: &str) -> usize {
        self.df.get(token).copied().unwrap_or(0)
    }

    pub fn idf(&self, token: &str) -> f64 {
        let df = self.df(token);
        ((self.doc_count as f64 + 1.0) / (df as f64 + 1.0)).ln() + 1.0
    }

    /// idf value assigned to tokens never seen in the corpus.
    pub fn default_idf(&self) -> f64 {
        (self.doc_count as f64 + 1.0).ln() + 1.0
    }
}

/// df counts documents containing the token at least once.
pub fn build_idf<S: AsRef<str>>(docs: &[Vec<S>]) -> Result<IdfTable> {
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for doc in docs {
        let mut seen: std::collections::BTreeSet<&str> = std::collections::BTreeSet::new();
        for token in doc {
            seen.insert(token.as_ref());
        }
        for token in seen {
            *df.entry(token.to_string()).or_insert(0) += 1;
        }
    }
    Ok(IdfTable {
        doc_count: docs.len(),
        df,
    })
}

/// Static token → polarity map, scores in [−1, 1].
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct SentimentLexicon {
    scores: BTreeMap<String, f64>,
}

impl SentimentLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, token: &str, score: f64) {
        assert!(
            (-1.0..=1.0).contains(&score),
            "sentiment score must be in [-1, 1]"
        );
        self.scores.insert(token.to_lowercase(), score);
    }

    pub fn get(&self, token: &str) -> Option<f64> {
        self.scores.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.scores.keys().map(|s| s.as_str())
    }

    /// TSV format: `token<TAB>score`, one per line.
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let reader = BufReader::new(file);
        let mut lex = SentimentLexicon::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (token, score) = line.split_once('\t').ok_or_else(|| Error::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                message: "expected `token<TAB>score`".into(),
            })?;
            let score: f64 = score.trim().parse().map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                message: format!("bad score: {e}"),
            })?;
            if !(-1.0..=1.0).contains(&score) {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    message: format!("score {score} outside [-1, 1]"),
                });
            }
            lex.insert(token.trim(), score);
        }
        Ok(lex)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for (token, score) in &self.scores {
            writeln!(out, "{token}\t{score}")?;
        }
        Ok(())
    }
}

/// IDF-weighted sum of token vectors: Σ over in-vocabulary tokens of
/// w2v(w)·idf(w). Out-of-vocabulary tokens are skipped; a phrase with no
/// in-vocabulary token at all is an error so the caller can fall back.
pub fn rep(phrase: &str, emb: &EmbeddingTable, idf: &IdfTable) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; emb.dim()];
    let mut any = false;
    for token in tokenize(phrase) {
        if let Some(vector) = emb.get(&token) {
            let weight = idf.idf(&token);
            for (a, v) in acc.iter_mut().zip(vector) {
                *a += v * weight;
            }
            any = true;
        }
    }
    if any {
        Ok(acc)
    } else {
        Err(Error::AllTokensOutOfVocabulary(phrase.to_string()))
    }
}

/// Cosine of two vectors; 0.0 when either norm vanishes.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Cosine similarity of the two phrase representations.
pub fn similarity(q: &str, p: &str, emb: &EmbeddingTable, idf: &IdfTable) -> Result<f64> {
    Ok(cosine(&rep(q, emb, idf)?, &rep(p, emb, idf)?))
}

/// Mean lexicon score over scored tokens, with unigram negation: a token
/// immediately preceded by a negator has its score flipped. 0.0 when no token
/// is scored.
pub fn senti_phrase(phrase: &str, lex: &SentimentLexicon) -> f64 {
    let tokens = tokenize(phrase);
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, token) in tokens.iter().enumerate() {
        if let Some(mut score) = lex.get(token) {
            if i > 0 && NEGATORS.contains(&tokens[i - 1].as_str()) {
                score = -score;
            }
            sum += score;
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Document sentiment rescaled to [0, 1] so it can act as a multiplicative
/// weight: (1 + senti_phrase) / 2. Neutral text maps to 0.5.
pub fn senti_doc(text: &str, lex: &SentimentLexicon) -> f64 {
    (1.0 + senti_phrase(text, lex)) / 2.0
}
