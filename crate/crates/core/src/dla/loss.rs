//! Listwise softmax losses: plain, inverse-propensity-weighted (IPW), and
//! inverse-relevance-weighted (IRW).
//!
//! The weighted losses reweight each clicked position by the ratio of the
//! companion model's top-position probability to its probability at that
//! position. Weights are constants: no gradient flows through them, each
//! model learns only from its own loss.

use crate::models::ListDistribution;

use super::DlaError;

/// `weights[i] = values[0] / values[i]`, optionally capped at `clip`.
pub(crate) fn inverse_weights(
    values: &[f64],
    clip: Option<f64>,
) -> Result<Vec<f64>, DlaError> {
    if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v <= 0.0) {
        return Err(DlaError::NonPositiveWeightSource { value: *bad });
    }
    let top = values[0];
    Ok(values
        .iter()
        .map(|v| {
            let w = top / v;
            match clip {
                Some(cap) => w.min(cap),
                None => w,
            }
        })
        .collect())
}

fn check_aligned(dist_len: usize, clicks_len: usize) -> Result<(), DlaError> {
    if dist_len != clicks_len {
        return Err(DlaError::Misaligned {
            distribution: dist_len,
            clicks: clicks_len,
        });
    }
    Ok(())
}

/// Cross entropy against arbitrary nonnegative per-position weights:
/// `-sum_i weights[i] * ln p_i`. The building block shared by every loss
/// here; click-model relevance signals enter training through this form.
pub fn weighted_softmax_loss(
    distribution: &ListDistribution,
    weights: &[f64],
) -> Result<f64, DlaError> {
    check_aligned(distribution.len(), weights.len())?;
    Ok(distribution
        .probs()
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w != 0.0)
        .map(|(p, w)| -w * p.ln())
        .sum())
}

/// Gradient of [`weighted_softmax_loss`] with respect to the scores under the
/// softmax: `(sum_i w_i) * p_j - w_j`.
pub fn weighted_softmax_loss_gradient(
    distribution: &ListDistribution,
    weights: &[f64],
) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    distribution
        .probs()
        .iter()
        .zip(weights)
        .map(|(p, w)| total * p - w)
        .collect()
}

/// Listwise softmax cross entropy over clicked positions: zero when nothing
/// was clicked.
pub fn plain_softmax_loss(
    distribution: &ListDistribution,
    clicks: &[bool],
) -> Result<f64, DlaError> {
    check_aligned(distribution.len(), clicks.len())?;
    let weights: Vec<f64> = clicks.iter().map(|&c| c as u8 as f64).collect();
    weighted_softmax_loss(distribution, &weights)
}

/// Inverse-propensity-weighted ranking loss. Each clicked position is
/// weighted by `propensity[0] / propensity[i]`; the propensity values act as
/// constants and need not be normalized, only positive.
pub fn ipw_rank_loss(
    rank_distribution: &ListDistribution,
    clicks: &[bool],
    propensity: &[f64],
    weight_clip: Option<f64>,
) -> Result<f64, DlaError> {
    check_aligned(rank_distribution.len(), clicks.len())?;
    check_aligned(rank_distribution.len(), propensity.len())?;
    let inv = inverse_weights(propensity, weight_clip)?;
    let weights: Vec<f64> = clicks
        .iter()
        .zip(&inv)
        .map(|(&c, w)| if c { *w } else { 0.0 })
        .collect();
    weighted_softmax_loss(rank_distribution, &weights)
}

/// Inverse-relevance-weighted propensity loss: the mirror image of
/// [`ipw_rank_loss`] with the roles of the two models swapped.
pub fn irw_propensity_loss(
    propensity_distribution: &ListDistribution,
    clicks: &[bool],
    relevance: &[f64],
    weight_clip: Option<f64>,
) -> Result<f64, DlaError> {
    ipw_rank_loss(propensity_distribution, clicks, relevance, weight_clip)
}
