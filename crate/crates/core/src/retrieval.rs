//! Inverted index with Okapi BM25 over reviews and per-entity concatenated
//! documents, sentiment-weighted top-k review search, and the text-retrieval
//! degree of truth.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Review;
use crate::text::{senti_doc, tokenize, SentimentLexicon};

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;

const INDEX_FORMAT_VERSION: u32 = 1;

/// Separator used to form review document ids from (entity_id, review_id).
const DOC_ID_SEP: char = '\u{1f}';

pub fn review_doc_id(entity_id: &str, review_id: &str) -> String {
    format!("{entity_id}{DOC_ID_SEP}{review_id}")
}

pub fn split_review_doc_id(doc_id: &str) -> Option<(&str, &str)> {
    doc_id.split_once(DOC_ID_SEP)
}

/// One entity's reviews concatenated into a single searchable document.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EntityDocument {
    pub entity_id: String,
    pub text: String,
}

/// Concatenate each entity's review texts in input order, one document per
/// entity, ordered by entity id.
pub fn build_entity_documents(reviews: &[Review]) -> Vec<EntityDocument> {
    let mut texts: BTreeMap<&str, String> = BTreeMap::new();
    for r in reviews {
        let slot = texts.entry(r.entity_id.as_str()).or_default();
        if !slot.is_empty() {
            slot.push('\n');
        }
        slot.push_str(&r.text);
    }
    texts
        .into_iter()
        .map(|(entity_id, text)| EntityDocument {
            entity_id: entity_id.to_string(),
            text,
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InvertedIndex {
    version: u32,
    /// token → (doc ordinal, term frequency), ordinals ascending.
    postings: BTreeMap<String, Vec<(u32, u32)>>,
    /// ordinal → external document id.
    doc_ids: Vec<String>,
    id_to_ord: BTreeMap<String, u32>,
    doc_lengths: Vec<u32>,
    /// Raw text per document, kept for sentiment scoring.
    texts: Vec<String>,
    avg_doc_length: f64,
}

impl InvertedIndex {
    /// Build from (doc id, text) pairs. Duplicate ids keep the first
    /// occurrence and ignore the rest.
    pub fn build<I, S>(docs: I) -> Self
    where
        I: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        let mut index = InvertedIndex {
            version: INDEX_FORMAT_VERSION,
            postings: BTreeMap::new(),
            doc_ids: Vec::new(),
            id_to_ord: BTreeMap::new(),
            doc_lengths: Vec::new(),
            texts: Vec::new(),
            avg_doc_length: 0.0,
        };
        for (id, text) in docs {
            let id = id.into();
            let text = text.into();
            if index.id_to_ord.contains_key(&id) {
                continue;
            }
            let ord = index.doc_ids.len() as u32;
            let tokens = tokenize(&text);
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in &tokens {
                *tf.entry(t.clone()).or_insert(0) += 1;
            }
            for (token, count) in tf {
                index.postings.entry(token).or_default().push((ord, count));
            }
            index.doc_lengths.push(tokens.len() as u32);
            index.id_to_ord.insert(id.clone(), ord);
            index.doc_ids.push(id);
            index.texts.push(text);
        }
        if !index.doc_lengths.is_empty() {
            index.avg_doc_length = index.doc_lengths.iter().map(|&l| l as f64).sum::<f64>()
                / index.doc_lengths.len() as f64;
        }
        index
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.doc_ids.iter().map(|s| s.as_str())
    }

    pub fn contains(&self, doc_id: &str) -> bool {
        self.id_to_ord.contains_key(doc_id)
    }

    pub fn text(&self, doc_id: &str) -> Option<&str> {
        self.id_to_ord
            .get(doc_id)
            .map(|&ord| self.texts[ord as usize].as_str())
    }

    fn ord(&self, doc_id: &str) -> Result<u32> {
        self.id_to_ord
            .get(doc_id)
            .copied()
            .ok_or_else(|| Error::UnknownDocument(doc_id.to_string()))
    }

    fn term_frequency(&self, token: &str, ord: u32) -> u32 {
        self.postings
            .get(token)
            .and_then(|posts| {
                posts
                    .binary_search_by_key(&ord, |&(d, _)| d)
                    .ok()
                    .map(|i| posts[i].1)
            })
            .unwrap_or(0)
    }

    fn df(&self, token: &str) -> usize {
        self.postings.get(token).map_or(0, |p| p.len())
    }

    /// BM25 idf with the non-negativity clamp: max(0, ln((N − df + 0.5) / (df + 0.5))).
    fn bm25_idf(&self, token: &str) -> f64 {
        let n = self.doc_count() as f64;
        let df = self.df(token) as f64;
        ((n - df + 0.5) / (df + 0.5)).ln().max(0.0)
    }

    /// Standard Okapi BM25 with k1 = 1.2, b = 0.75. Each occurrence in
    /// `query_tokens` contributes, so repeated query tokens count repeatedly.
    pub fn bm25(&self, doc_id: &str, query_tokens: &[String]) -> Result<f64> {
        let ord = self.ord(doc_id)?;
        Ok(self.bm25_by_ord(ord, query_tokens))
    }

    fn bm25_by_ord(&self, ord: u32, query_tokens: &[String]) -> f64 {
        let doc_len = self.doc_lengths[ord as usize] as f64;
        let mut score = 0.0;
        for token in query_tokens {
            let tf = self.term_frequency(token, ord) as f64;
            if tf == 0.0 {
                continue;
            }
            let idf = self.bm25_idf(token);
            let norm =
                (tf * (BM25_K1 + 1.0)) / (tf + BM25_K1 * (1.0 - BM25_B + BM25_B * doc_len / self.avg_doc_length));
            score += idf * norm;
        }
        score
    }

    /// BM25 weighted by document sentiment: bm25 · senti_doc(text).
    pub fn rank_score(
        &self,
        doc_id: &str,
        query_tokens: &[String],
        lex: &SentimentLexicon,
    ) -> Result<f64> {
        let ord = self.ord(doc_id)?;
        Ok(self.bm25_by_ord(ord, query_tokens) * senti_doc(&self.texts[ord as usize], lex))
    }

    /// Top-k documents by rank_score, descending, ties broken by ascending
    /// doc id. Returns exactly min(k, number of docs scoring > 0).
    pub fn top_k_reviews(
        &self,
        query: &str,
        k: usize,
        lex: &SentimentLexicon,
    ) -> Vec<(String, f64)> {
        let query_tokens = tokenize(query);
        let mut scored: Vec<(u32, f64)> = Vec::new();
        for ord in 0..self.doc_count() as u32 {
            let score =
                self.bm25_by_ord(ord, &query_tokens) * senti_doc(&self.texts[ord as usize], lex);
            if score > 0.0 {
                scored.push((ord, score));
            }
        }
        scored.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| self.doc_ids[a.0 as usize].cmp(&self.doc_ids[b.0 as usize]))
        });
        scored
            .into_iter()
            .take(k)
            .map(|(ord, score)| (self.doc_ids[ord as usize].clone(), score))
            .collect()
    }

    /// BM25 score of every document for the query, in ordinal order.
    pub fn bm25_all(&self, query_tokens: &[String]) -> Vec<(String, f64)> {
        (0..self.doc_count() as u32)
            .map(|ord| {
                (
                    self.doc_ids[ord as usize].clone(),
                    self.bm25_by_ord(ord, query_tokens),
                )
            })
            .collect()
    }

    /// Median of the nonzero BM25 scores over all documents for this query
    /// (lower middle for even counts). None when every score is zero.
    pub fn median_nonzero_bm25(&self, query_tokens: &[String]) -> Option<f64> {
        let mut scores: Vec<f64> = (0..self.doc_count() as u32)
            .map(|ord| self.bm25_by_ord(ord, query_tokens))
            .filter(|&s| s > 0.0)
            .collect();
        if scores.is_empty() {
            return None;
        }
        scores.sort_by(f64::total_cmp);
        Some(scores[(scores.len() - 1) / 2])
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let index: InvertedIndex = serde_json::from_reader(std::io::BufReader::new(file))?;
        if index.version != INDEX_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "index format version {} unsupported (expected {})",
                index.version, INDEX_FORMAT_VERSION
            )));
        }
        Ok(index)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Degree of truth of a predicate against an entity document:
/// sigmoid(BM25(D, q) − c). Strictly inside (0, 1) and monotone in BM25.
pub fn text_retrieval_degree(
    entity_index: &InvertedIndex,
    entity_id: &str,
    query: &str,
    c: f64,
) -> Result<f64> {
    if !entity_index.contains(entity_id) {
        return Err(Error::UnknownEntity(entity_id.to_string()));
    }
    let score = entity_index.bm25(entity_id, &tokenize(query))?;
    Ok(sigmoid(score - c))
}
