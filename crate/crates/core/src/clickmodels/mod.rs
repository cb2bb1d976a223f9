//! EM-based click models (UBM and DBN) that extract relevance signals from
//! logged sessions.
//!
//! Both models are fit by expectation-maximization with additive add-one
//! style smoothing, so the maximized objective is the log-likelihood plus a
//! symmetric Beta prior term. That penalized objective is non-decreasing
//! every iteration; fits record both it and the raw data log-likelihood.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod dbn;
pub mod ubm;

pub use dbn::{dbn_fit, simulate_dbn_session, DbnFit, DbnParams};
pub use ubm::{simulate_ubm_session, ubm_fit, UbmFit, UbmParams};

use crate::dataset::ClickSession;

/// Sessions with fewer impressions of a (query, document) pair than this
/// trigger a sparsity warning during fitting.
pub const SPARSE_PAIR_WARNING: usize = 10;

#[derive(Debug, Error)]
pub enum ClickModelError {
    #[error("no sessions provided")]
    EmptySessions,
    #[error("session for query {query_id} has list length {got}, expected at most {max_rank}")]
    ListTooLong {
        query_id: String,
        got: usize,
        max_rank: usize,
    },
    #[error("unknown (query, document) pair ({query_id}, {doc_id})")]
    UnknownPair { query_id: String, doc_id: String },
    #[error("invalid prior: {0}")]
    BadPrior(String),
}

/// Initial parameter values and smoothing strength shared by both models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClickModelPrior {
    /// Pseudo-successes added in every M-step (pseudo-trials are twice this).
    pub smoothing: f64,
    pub attractiveness: f64,
    pub examination: f64,
    pub satisfaction: f64,
    pub persistence: f64,
}

impl Default for ClickModelPrior {
    fn default() -> Self {
        ClickModelPrior {
            smoothing: 1.0,
            attractiveness: 0.5,
            examination: 0.5,
            satisfaction: 0.5,
            persistence: 0.5,
        }
    }
}

impl ClickModelPrior {
    pub(crate) fn validate(&self) -> Result<(), ClickModelError> {
        if !self.smoothing.is_finite() || self.smoothing < 0.0 {
            return Err(ClickModelError::BadPrior(format!(
                "smoothing must be nonnegative, got {}",
                self.smoothing
            )));
        }
        for (name, v) in [
            ("attractiveness", self.attractiveness),
            ("examination", self.examination),
            ("satisfaction", self.satisfaction),
            ("persistence", self.persistence),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(ClickModelError::BadPrior(format!(
                    "initial {name} must lie strictly inside (0, 1), got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Smoothed M-step update for a Bernoulli parameter.
    pub(crate) fn update(&self, successes: f64, trials: f64) -> f64 {
        (successes + self.smoothing) / (trials + 2.0 * self.smoothing)
    }

    /// Symmetric Beta log-density contribution of one parameter.
    pub(crate) fn log_prior(&self, p: f64) -> f64 {
        self.smoothing * (p.ln() + (1.0 - p).ln())
    }
}

/// Relevance estimates per (query, document) pair in [0, 1].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RelevanceSignal {
    pub values: BTreeMap<(String, String), f64>,
}

impl RelevanceSignal {
    pub fn get(&self, query_id: &str, doc_id: &str) -> Option<f64> {
        self.values
            .get(&(query_id.to_string(), doc_id.to_string()))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Fitted parameters of either click model.
#[derive(Debug, Clone, PartialEq)]
pub enum ClickModelParams {
    Ubm(UbmParams),
    Dbn(DbnParams),
}

/// Relevance signals for every pair appearing in the sessions: UBM uses
/// attractiveness, DBN the product of attractiveness and satisfaction.
pub fn extract_relevance(
    params: &ClickModelParams,
    sessions: &[ClickSession],
) -> Result<RelevanceSignal, ClickModelError> {
    let mut signal = RelevanceSignal::default();
    for session in sessions {
        for doc_id in &session.doc_ids {
            let key = (session.query_id.clone(), doc_id.clone());
            if signal.values.contains_key(&key) {
                continue;
            }
            let value = match params {
                ClickModelParams::Ubm(p) => p.attractiveness_of(&key.0, &key.1),
                ClickModelParams::Dbn(p) => p.relevance_of(&key.0, &key.1),
            }
            .ok_or_else(|| ClickModelError::UnknownPair {
                query_id: key.0.clone(),
                doc_id: key.1.clone(),
            })?;
            signal.values.insert(key, value);
        }
    }
    Ok(signal)
}

pub(crate) fn warn_sparse_pairs(counts: &BTreeMap<(String, String), usize>) {
    let sparse = counts.values().filter(|c| **c < SPARSE_PAIR_WARNING).count();
    if sparse > 0 {
        log::warn!(
            "{sparse} of {} (query, document) pairs have fewer than {SPARSE_PAIR_WARNING} sessions; estimates will be noisy",
            counts.len()
        );
    }
}
