//! Scoring models: a feed-forward ranker with analytic gradients, the
//! per-position propensity table, and the softmax normalization that turns
//! either one into a distribution over list positions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod checkpoint;
mod matrix;
mod propensity;
mod ranker;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError};
pub use matrix::Matrix;
pub use propensity::{propensity_distribution, PropensityParams};
pub use ranker::{
    elu, score_documents, score_gradients, DenseLayer, RankerArch, RankerGradients, RankerParams,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{context}: expected {expected} values, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("empty value list")]
    EmptyList,
    #[error("list length {list_length} exceeds propensity table size {max_rank}")]
    ListTooLong { list_length: usize, max_rank: usize },
    #[error("not a probability distribution: {reason}")]
    BadDistribution { reason: String },
}

/// A probability distribution over the positions of one ranked list.
///
/// Entries are positive and sum to 1 within 1e-9.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListDistribution {
    probs: Vec<f64>,
}

impl ListDistribution {
    /// Validate and wrap an explicit probability vector.
    pub fn new(probs: Vec<f64>) -> Result<Self, ModelError> {
        if probs.is_empty() {
            return Err(ModelError::EmptyList);
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p <= 0.0) {
            return Err(ModelError::BadDistribution {
                reason: format!("nonpositive entry {p}"),
            });
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(ModelError::BadDistribution {
                reason: format!("entries sum to {total}"),
            });
        }
        Ok(ListDistribution { probs })
    }

    pub fn uniform(len: usize) -> Result<Self, ModelError> {
        if len == 0 {
            return Err(ModelError::EmptyList);
        }
        Ok(ListDistribution {
            probs: vec![1.0 / len as f64; len],
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Probability of the top position, the marginal used as the numerator of
    /// inverse weights.
    pub fn first(&self) -> f64 {
        self.probs[0]
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Softmax of a value vector, computed with max-subtraction for stability.
pub fn softmax_over_list(values: &[f64]) -> Result<ListDistribution, ModelError> {
    if values.is_empty() {
        return Err(ModelError::EmptyList);
    }
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // Floor at the smallest normal float: entries must stay positive even
    // when the gap to the maximum underflows exp().
    let exps: Vec<f64> = values
        .iter()
        .map(|v| (v - max).exp().max(f64::MIN_POSITIVE))
        .collect();
    let total: f64 = exps.iter().sum();
    Ok(ListDistribution {
        probs: exps.into_iter().map(|e| e / total).collect(),
    })
}
