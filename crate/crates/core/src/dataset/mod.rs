//! Learning-to-rank datasets and click logs.
//!
//! A [`Dataset`] groups queries with candidate documents (feature vectors and
//! graded relevance labels). [`RankedList`] fixes a presentation order for one
//! query, and [`ClickSession`] records one impression of such a list together
//! with its click pattern. All types are immutable after construction and safe
//! to share across threads.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

pub mod click_log;
pub mod letor;
pub mod synthetic;

pub use click_log::{parse_click_log, write_click_log};
pub use letor::{parse_letor, write_letor};
pub use synthetic::{generate_synthetic, SyntheticConfig};

/// Default truncation depth for ranked lists and click simulation.
pub const DEFAULT_MAX_RANK: usize = 10;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: label {label} outside [0, {y_max}]")]
    LabelOutOfRange { line: usize, label: i64, y_max: u32 },
    #[error("empty input")]
    EmptyInput,
    #[error("input contains no features")]
    NoFeatures,
    #[error("document {doc_id} in query {query_id}: feature length {got}, dataset dimension {expected}")]
    FeatureDimMismatch {
        query_id: String,
        doc_id: String,
        got: usize,
        expected: usize,
    },
    #[error("document {doc_id} in query {query_id}: label {label} exceeds y_max {y_max}")]
    BadLabel {
        query_id: String,
        doc_id: String,
        label: u32,
        y_max: u32,
    },
    #[error("query {query_id} has no documents")]
    EmptyQuery { query_id: String },
    #[error("duplicate query id {query_id}")]
    DuplicateQuery { query_id: String },
    #[error("duplicate document id {doc_id} in query {query_id}")]
    DuplicateDoc { query_id: String, doc_id: String },
    #[error("ranked list for query {query_id} references unknown document {doc_id}")]
    UnknownDoc { query_id: String, doc_id: String },
    #[error("ranked list for query {query_id} is empty")]
    EmptyList { query_id: String },
    #[error("clicks length {clicks} does not match list length {docs}")]
    ClickLengthMismatch { clicks: usize, docs: usize },
    #[error("latent trace violates click = observed AND perceived_relevant at position {position}")]
    InconsistentTrace { position: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which partition of a corpus a dataset represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// One candidate document: an id, a feature vector, and a graded label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub features: Vec<f64>,
    pub label: u32,
}

/// A query with its ordered collection of candidate documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub query_id: String,
    pub documents: Vec<Document>,
}

impl Query {
    /// Index of a document within the query, if present.
    pub fn doc_index(&self, doc_id: &str) -> Option<usize> {
        self.documents.iter().position(|d| d.doc_id == doc_id)
    }
}

/// Provenance of a synthetic corpus: the generating linear function and the
/// label noise that was applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorInfo {
    pub weights: Vec<f64>,
    pub noise_std: f64,
}

/// A collection of queries with a common feature dimensionality and label scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub queries: Vec<Query>,
    pub feature_dim: usize,
    pub y_max: u32,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorInfo>,
}

impl Dataset {
    /// Build a dataset, checking every structural invariant.
    pub fn new(
        queries: Vec<Query>,
        feature_dim: usize,
        y_max: u32,
        split: Split,
    ) -> Result<Self, DatasetError> {
        let mut qids = HashSet::new();
        for query in &queries {
            if !qids.insert(query.query_id.clone()) {
                return Err(DatasetError::DuplicateQuery {
                    query_id: query.query_id.clone(),
                });
            }
            if query.documents.is_empty() {
                return Err(DatasetError::EmptyQuery {
                    query_id: query.query_id.clone(),
                });
            }
            let mut dids = HashSet::new();
            for doc in &query.documents {
                if !dids.insert(doc.doc_id.as_str()) {
                    return Err(DatasetError::DuplicateDoc {
                        query_id: query.query_id.clone(),
                        doc_id: doc.doc_id.clone(),
                    });
                }
                if doc.features.len() != feature_dim {
                    return Err(DatasetError::FeatureDimMismatch {
                        query_id: query.query_id.clone(),
                        doc_id: doc.doc_id.clone(),
                        got: doc.features.len(),
                        expected: feature_dim,
                    });
                }
                if doc.label > y_max {
                    return Err(DatasetError::BadLabel {
                        query_id: query.query_id.clone(),
                        doc_id: doc.doc_id.clone(),
                        label: doc.label,
                        y_max,
                    });
                }
            }
        }
        Ok(Dataset {
            queries,
            feature_dim,
            y_max,
            split,
            generator: None,
        })
    }

    pub fn num_queries(&self) -> usize {
        self.queries.len()
    }

    pub fn num_documents(&self) -> usize {
        self.queries.iter().map(|q| q.documents.len()).sum()
    }

    pub fn query(&self, query_id: &str) -> Option<&Query> {
        self.queries.iter().find(|q| q.query_id == query_id)
    }
}

/// A presentation order for one query, truncated at `max_rank`.
///
/// Position 1 is the top of the list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedList {
    pub query_id: String,
    pub doc_ids: Vec<String>,
}

impl RankedList {
    /// Build a list from an explicit document order, truncating at `max_rank`.
    pub fn from_ranking(
        query: &Query,
        doc_ids: &[String],
        max_rank: usize,
    ) -> Result<Self, DatasetError> {
        if doc_ids.is_empty() || max_rank == 0 {
            return Err(DatasetError::EmptyList {
                query_id: query.query_id.clone(),
            });
        }
        let truncated: Vec<String> = doc_ids.iter().take(max_rank).cloned().collect();
        let mut seen = HashSet::new();
        for doc_id in &truncated {
            if query.doc_index(doc_id).is_none() {
                return Err(DatasetError::UnknownDoc {
                    query_id: query.query_id.clone(),
                    doc_id: doc_id.clone(),
                });
            }
            if !seen.insert(doc_id.as_str()) {
                return Err(DatasetError::DuplicateDoc {
                    query_id: query.query_id.clone(),
                    doc_id: doc_id.clone(),
                });
            }
        }
        Ok(RankedList {
            query_id: query.query_id.clone(),
            doc_ids: truncated,
        })
    }

    /// Rank the query's documents by descending score, truncating at `max_rank`.
    ///
    /// Ties break by original document order, so the result is deterministic.
    pub fn by_scores(query: &Query, scores: &[f64], max_rank: usize) -> Result<Self, DatasetError> {
        assert_eq!(
            scores.len(),
            query.documents.len(),
            "one score per document required"
        );
        let order = sort_descending(scores);
        let doc_ids: Vec<String> = order
            .into_iter()
            .map(|i| query.documents[i].doc_id.clone())
            .collect();
        Self::from_ranking(query, &doc_ids, max_rank)
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }
}

/// Indices sorted by descending value, stable under ties.
pub fn sort_descending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).expect("finite scores"));
    order
}

/// Per-position hidden state of a simulated session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentTrace {
    pub observed: Vec<bool>,
    pub perceived_relevant: Vec<bool>,
}

/// One impression of a ranked list with its click pattern.
///
/// Simulated sessions keep the latent examination/relevance draws so that
/// oracle tests can check the click factorization; logged sessions carry none.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickSession {
    pub query_id: String,
    pub doc_ids: Vec<String>,
    pub clicks: Vec<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent: Option<LatentTrace>,
}

impl ClickSession {
    pub fn new(
        query_id: String,
        doc_ids: Vec<String>,
        clicks: Vec<bool>,
        latent: Option<LatentTrace>,
    ) -> Result<Self, DatasetError> {
        if clicks.len() != doc_ids.len() {
            return Err(DatasetError::ClickLengthMismatch {
                clicks: clicks.len(),
                docs: doc_ids.len(),
            });
        }
        if let Some(trace) = &latent {
            if trace.observed.len() != doc_ids.len() || trace.perceived_relevant.len() != doc_ids.len()
            {
                return Err(DatasetError::ClickLengthMismatch {
                    clicks: trace.observed.len().min(trace.perceived_relevant.len()),
                    docs: doc_ids.len(),
                });
            }
            for (i, &click) in clicks.iter().enumerate() {
                if click != (trace.observed[i] && trace.perceived_relevant[i]) {
                    return Err(DatasetError::InconsistentTrace { position: i + 1 });
                }
            }
        }
        Ok(ClickSession {
            query_id,
            doc_ids,
            clicks,
            latent,
        })
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    /// Copy of the session without its latent trace.
    pub fn without_latent(&self) -> ClickSession {
        ClickSession {
            query_id: self.query_id.clone(),
            doc_ids: self.doc_ids.clone(),
            clicks: self.clicks.clone(),
            latent: None,
        }
    }
}
