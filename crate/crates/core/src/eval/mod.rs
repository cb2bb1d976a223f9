//! Retrieval metrics, propensity-estimation quality, and significance tests.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod metrics;
mod significance;

pub use metrics::{average_precision, err_at_k, ndcg_at_k, propensity_mse};
pub use significance::fisher_randomization_test;

use crate::dataset::{sort_descending, Query};
use crate::models::{score_documents, ModelError, RankerParams};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    Empty,
    #[error("permutation count must be positive")]
    NoPermutations,
    #[error("reports are not aligned: query {index} is {left} vs {right}")]
    Misaligned {
        index: usize,
        left: String,
        right: String,
    },
    #[error("unknown metric {0}")]
    UnknownMetric(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Which metrics to compute and how to binarize MAP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSpec {
    pub ndcg_ks: Vec<usize>,
    pub err_ks: Vec<usize>,
    /// Documents with `label >= map_threshold` count as relevant for MAP.
    pub map_threshold: u32,
    pub y_max: u32,
}

impl MetricsSpec {
    /// nDCG@{1,3,5,10}, ERR@{1,3,5,10}, MAP binarized at label >= 1.
    pub fn standard(y_max: u32) -> Self {
        MetricsSpec {
            ndcg_ks: vec![1, 3, 5, 10],
            err_ks: vec![1, 3, 5, 10],
            map_threshold: 1,
            y_max,
        }
    }
}

/// Metrics of one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    pub query_id: String,
    pub map: f64,
    pub ndcg: Vec<f64>,
    pub err: Vec<f64>,
}

/// Mean metrics across queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub map: f64,
    pub ndcg: Vec<f64>,
    pub err: Vec<f64>,
}

/// Per-metric p-values of one report against a baseline report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceReport {
    pub baseline: String,
    pub permutations: usize,
    pub p_values: BTreeMap<String, f64>,
}

/// Per-query and aggregate retrieval metrics, with optional propensity
/// quality and significance attachments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub spec: MetricsSpec,
    pub per_query: Vec<QueryMetrics>,
    pub mean: Aggregates,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub propensity_mse: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub significance: Option<SignificanceReport>,
}

impl MetricsReport {
    /// Evaluate label sequences already in ranked order.
    pub fn from_ranked_labels(
        ranked: &[(String, Vec<u32>)],
        spec: &MetricsSpec,
    ) -> Result<Self, EvalError> {
        if ranked.is_empty() {
            return Err(EvalError::Empty);
        }
        let per_query: Vec<QueryMetrics> = ranked
            .iter()
            .map(|(query_id, labels)| QueryMetrics {
                query_id: query_id.clone(),
                map: average_precision(labels, spec.map_threshold),
                ndcg: spec.ndcg_ks.iter().map(|&k| ndcg_at_k(labels, k)).collect(),
                err: spec
                    .err_ks
                    .iter()
                    .map(|&k| err_at_k(labels, k, spec.y_max))
                    .collect(),
            })
            .collect();
        let n = per_query.len() as f64;
        let mean = Aggregates {
            map: per_query.iter().map(|q| q.map).sum::<f64>() / n,
            ndcg: (0..spec.ndcg_ks.len())
                .map(|i| per_query.iter().map(|q| q.ndcg[i]).sum::<f64>() / n)
                .collect(),
            err: (0..spec.err_ks.len())
                .map(|i| per_query.iter().map(|q| q.err[i]).sum::<f64>() / n)
                .collect(),
        };
        Ok(MetricsReport {
            spec: spec.clone(),
            per_query,
            mean,
            propensity_mse: None,
            significance: None,
        })
    }

    pub fn mean_ndcg_at(&self, k: usize) -> Option<f64> {
        let idx = self.spec.ndcg_ks.iter().position(|&x| x == k)?;
        Some(self.mean.ndcg[idx])
    }

    pub fn mean_err_at(&self, k: usize) -> Option<f64> {
        let idx = self.spec.err_ks.iter().position(|&x| x == k)?;
        Some(self.mean.err[idx])
    }

    pub fn per_query_ndcg_at(&self, k: usize) -> Option<Vec<f64>> {
        let idx = self.spec.ndcg_ks.iter().position(|&x| x == k)?;
        Some(self.per_query.iter().map(|q| q.ndcg[idx]).collect())
    }

    /// Metric column names in CSV order.
    pub fn metric_names(&self) -> Vec<String> {
        let mut names = vec!["map".to_string()];
        names.extend(self.spec.ndcg_ks.iter().map(|k| format!("ndcg@{k}")));
        names.extend(self.spec.err_ks.iter().map(|k| format!("err@{k}")));
        names
    }

    fn metric_row(&self, q: &QueryMetrics) -> Vec<f64> {
        let mut row = vec![q.map];
        row.extend(&q.ndcg);
        row.extend(&q.err);
        row
    }

    /// One row per query plus a `mean` aggregate row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("query_id");
        for name in self.metric_names() {
            out.push(',');
            out.push_str(&name);
        }
        out.push('\n');
        for q in &self.per_query {
            out.push_str(&q.query_id);
            for v in self.metric_row(q) {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out.push_str("mean");
        let mut means = vec![self.mean.map];
        means.extend(&self.mean.ndcg);
        means.extend(&self.mean.err);
        for v in means {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
        out
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    /// Fisher randomization p-values for every metric against an aligned
    /// baseline report.
    pub fn compare(
        &self,
        baseline: &MetricsReport,
        baseline_name: &str,
        permutations: usize,
        seed: u64,
    ) -> Result<SignificanceReport, EvalError> {
        if self.per_query.len() != baseline.per_query.len() {
            return Err(EvalError::LengthMismatch {
                left: self.per_query.len(),
                right: baseline.per_query.len(),
            });
        }
        for (index, (a, b)) in self.per_query.iter().zip(&baseline.per_query).enumerate() {
            if a.query_id != b.query_id {
                return Err(EvalError::Misaligned {
                    index,
                    left: a.query_id.clone(),
                    right: b.query_id.clone(),
                });
            }
        }
        let mut p_values = BTreeMap::new();
        let names = self.metric_names();
        for (idx, name) in names.iter().enumerate() {
            let ours: Vec<f64> = self.per_query.iter().map(|q| self.metric_row(q)[idx]).collect();
            let theirs: Vec<f64> = baseline
                .per_query
                .iter()
                .map(|q| baseline.metric_row(q)[idx])
                .collect();
            let p = fisher_randomization_test(&ours, &theirs, permutations, seed ^ idx as u64)?;
            p_values.insert(name.clone(), p);
        }
        Ok(SignificanceReport {
            baseline: baseline_name.to_string(),
            permutations,
            p_values,
        })
    }
}

/// Rank every query's candidates with the given model and evaluate against
/// the judged labels.
pub fn evaluate_ranker(
    queries: &[Query],
    params: &RankerParams,
    spec: &MetricsSpec,
) -> Result<MetricsReport, EvalError> {
    let ranked: Vec<(String, Vec<u32>)> = queries
        .iter()
        .map(|query| {
            let features: Vec<Vec<f64>> =
                query.documents.iter().map(|d| d.features.clone()).collect();
            let scores = score_documents(params, &features)?;
            let labels = sort_descending(&scores)
                .into_iter()
                .map(|i| query.documents[i].label)
                .collect();
            Ok((query.query_id.clone(), labels))
        })
        .collect::<Result<_, EvalError>>()?;
    MetricsReport::from_ranked_labels(&ranked, spec)
}
