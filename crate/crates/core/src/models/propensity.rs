//! Per-position propensity parameters.

use serde::{Deserialize, Serialize};

use super::{softmax_over_list, ListDistribution, ModelError};

/// One real parameter per list position; softmaxing a prefix yields the
/// examination distribution of a list of that length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityParams {
    pub phi: Vec<f64>,
}

impl PropensityParams {
    /// Zero-initialized table, the canonical starting point.
    pub fn zeros(max_rank: usize) -> Self {
        PropensityParams {
            phi: vec![0.0; max_rank],
        }
    }

    pub fn new(phi: Vec<f64>) -> Self {
        PropensityParams { phi }
    }

    pub fn max_rank(&self) -> usize {
        self.phi.len()
    }

    /// Inverse propensity weights `g_1 / g_i` implied by the table, over the
    /// full `max_rank` prefix.
    pub fn inverse_weights(&self) -> Vec<f64> {
        let dist = propensity_distribution(self, self.phi.len()).expect("full prefix is valid");
        let first = dist.first();
        dist.probs().iter().map(|g| first / g).collect()
    }
}

/// Softmax over the first `list_length` entries of the table.
pub fn propensity_distribution(
    params: &PropensityParams,
    list_length: usize,
) -> Result<ListDistribution, ModelError> {
    if list_length == 0 {
        return Err(ModelError::EmptyList);
    }
    if list_length > params.phi.len() {
        return Err(ModelError::ListTooLong {
            list_length,
            max_rank: params.phi.len(),
        });
    }
    softmax_over_list(&params.phi[..list_length])
}
