//! Position-biased click simulation and result randomization.
//!
//! A user clicks position `i` iff they examine it and perceive the document
//! as relevant. Examination follows `P(o_i = 1) = rho_i ^ eta`; perceived
//! relevance follows `epsilon + (1 - epsilon) * (2^y - 1) / (2^y_max - 1)`.
//! Shuffling lists uniformly before sampling makes the mean click rate per
//! position proportional to the examination probability, which is what the
//! randomized propensity estimator exploits.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{ClickSession, LatentTrace, RankedList};

#[derive(Debug, Error)]
pub enum ClickSimError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("position {position} out of range 1..={max_rank}")]
    PositionOutOfRange { position: usize, max_rank: usize },
    #[error("label {label} outside [0, {y_max}]")]
    LabelOutOfRange { label: u32, y_max: u32 },
    #[error("labels length {labels} does not match list length {docs}")]
    LabelLengthMismatch { labels: usize, docs: usize },
    #[error("no sessions provided")]
    EmptySessions,
    #[error("no clicks observed at position {position}; more sessions needed")]
    NoClicksAtPosition { position: usize },
}

/// Parameters of the position-based click model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClickSimConfig {
    /// Base examination probability per position; `rho[0]` is the top.
    pub rho: Vec<f64>,
    /// Severity exponent for the position bias.
    pub eta: f64,
    /// Click-noise floor: perceived relevance of a grade-0 document.
    pub epsilon: f64,
    pub y_max: u32,
    pub seed: u64,
}

impl ClickSimConfig {
    pub fn new(
        rho: Vec<f64>,
        eta: f64,
        epsilon: f64,
        y_max: u32,
        seed: u64,
    ) -> Result<Self, ClickSimError> {
        if rho.is_empty() {
            return Err(ClickSimError::InvalidConfig("rho must be nonempty".into()));
        }
        if rho[0] != 1.0 {
            return Err(ClickSimError::InvalidConfig(format!(
                "rho[0] must be 1, got {}",
                rho[0]
            )));
        }
        if let Some(bad) = rho.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
            return Err(ClickSimError::InvalidConfig(format!(
                "rho entries must lie in (0, 1], got {bad}"
            )));
        }
        if !eta.is_finite() || eta < 0.0 {
            return Err(ClickSimError::InvalidConfig(format!(
                "eta must be nonnegative, got {eta}"
            )));
        }
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(ClickSimError::InvalidConfig(format!(
                "epsilon must lie in [0, 1], got {epsilon}"
            )));
        }
        if y_max == 0 {
            return Err(ClickSimError::InvalidConfig("y_max must be positive".into()));
        }
        Ok(ClickSimConfig {
            rho,
            eta,
            epsilon,
            y_max,
            seed,
        })
    }

    /// The standard inverse-rank curve `rho_i = 1/i` up to `max_rank`.
    pub fn inverse_rank(
        max_rank: usize,
        eta: f64,
        epsilon: f64,
        y_max: u32,
        seed: u64,
    ) -> Result<Self, ClickSimError> {
        let rho = (1..=max_rank).map(|i| 1.0 / i as f64).collect();
        Self::new(rho, eta, epsilon, y_max, seed)
    }

    pub fn max_rank(&self) -> usize {
        self.rho.len()
    }

    /// True inverse propensity weights `rho_1^eta / rho_i^eta`.
    pub fn true_inverse_weights(&self) -> Vec<f64> {
        let top = self.rho[0].powf(self.eta);
        self.rho.iter().map(|r| top / r.powf(self.eta)).collect()
    }
}

/// `P(o_i = 1) = rho_i ^ eta` for a 1-based position.
pub fn examination_prob(config: &ClickSimConfig, position: usize) -> Result<f64, ClickSimError> {
    if position == 0 || position > config.rho.len() {
        return Err(ClickSimError::PositionOutOfRange {
            position,
            max_rank: config.rho.len(),
        });
    }
    Ok(config.rho[position - 1].powf(config.eta))
}

/// `P(r = 1) = epsilon + (1 - epsilon) * (2^label - 1) / (2^y_max - 1)`.
pub fn perceived_relevance_prob(
    label: u32,
    y_max: u32,
    epsilon: f64,
) -> Result<f64, ClickSimError> {
    if label > y_max {
        return Err(ClickSimError::LabelOutOfRange { label, y_max });
    }
    let numerator = 2f64.powi(label as i32) - 1.0;
    let denominator = 2f64.powi(y_max as i32) - 1.0;
    Ok(epsilon + (1.0 - epsilon) * numerator / denominator)
}

/// Sample one session: per position draw examination and perceived relevance,
/// click iff both. The latent draws are retained on the session.
pub fn sample_session(
    list: &RankedList,
    labels: &[u32],
    config: &ClickSimConfig,
    rng: &mut ChaCha8Rng,
) -> Result<ClickSession, ClickSimError> {
    if labels.len() != list.len() {
        return Err(ClickSimError::LabelLengthMismatch {
            labels: labels.len(),
            docs: list.len(),
        });
    }
    let mut observed = Vec::with_capacity(list.len());
    let mut perceived = Vec::with_capacity(list.len());
    let mut clicks = Vec::with_capacity(list.len());
    for (idx, &label) in labels.iter().enumerate() {
        let o = rng.gen_bool(examination_prob(config, idx + 1)?);
        let r = rng.gen_bool(perceived_relevance_prob(label, config.y_max, config.epsilon)?);
        observed.push(o);
        perceived.push(r);
        clicks.push(o && r);
    }
    Ok(ClickSession {
        query_id: list.query_id.clone(),
        doc_ids: list.doc_ids.clone(),
        clicks,
        latent: Some(LatentTrace {
            observed,
            perceived_relevant: perceived,
        }),
    })
}

/// Uniform random permutation of a ranked list.
pub fn shuffle_list(list: &RankedList, rng: &mut ChaCha8Rng) -> RankedList {
    let mut doc_ids = list.doc_ids.clone();
    // Fisher-Yates; rand's shuffle would also do, spelled out here so the
    // draw order is part of this crate's contract.
    for i in (1..doc_ids.len()).rev() {
        let j = rng.gen_range(0..=i);
        doc_ids.swap(i, j);
    }
    RankedList {
        query_id: list.query_id.clone(),
        doc_ids,
    }
}

/// Inverse propensity weights recovered from randomized sessions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityEstimate {
    /// `weights[i] = mean_click_rate(1) / mean_click_rate(i+1)`.
    pub weights: Vec<f64>,
    pub sessions_used: usize,
}

/// Streaming accumulator of per-position click rates.
///
/// Sessions may arrive in chunks of any size; the final estimate depends only
/// on the multiset of sessions, so chunked feeding stays deterministic.
#[derive(Debug, Clone, Default)]
pub struct PropensityAccumulator {
    clicks: Vec<f64>,
    impressions: Vec<f64>,
    sessions: usize,
}

impl PropensityAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_session(&mut self, session: &ClickSession) {
        if session.len() > self.clicks.len() {
            self.clicks.resize(session.len(), 0.0);
            self.impressions.resize(session.len(), 0.0);
        }
        for (i, &clicked) in session.clicks.iter().enumerate() {
            self.impressions[i] += 1.0;
            if clicked {
                self.clicks[i] += 1.0;
            }
        }
        self.sessions += 1;
    }

    pub fn sessions(&self) -> usize {
        self.sessions
    }

    /// Mean click rate per position.
    pub fn click_rates(&self) -> Vec<f64> {
        self.clicks
            .iter()
            .zip(&self.impressions)
            .map(|(c, n)| if *n > 0.0 { c / n } else { 0.0 })
            .collect()
    }

    pub fn finish(self) -> Result<PropensityEstimate, ClickSimError> {
        if self.sessions == 0 {
            return Err(ClickSimError::EmptySessions);
        }
        let rates = self.click_rates();
        if let Some(pos) = rates.iter().position(|r| *r <= 0.0) {
            return Err(ClickSimError::NoClicksAtPosition { position: pos + 1 });
        }
        let top = rates[0];
        Ok(PropensityEstimate {
            weights: rates.iter().map(|r| top / r).collect(),
            sessions_used: self.sessions,
        })
    }
}

/// Estimate inverse propensity weights from uniformly shuffled sessions.
pub fn estimate_propensity_randomized<'a>(
    sessions: impl IntoIterator<Item = &'a ClickSession>,
) -> Result<PropensityEstimate, ClickSimError> {
    let mut acc = PropensityAccumulator::new();
    for session in sessions {
        acc.add_session(session);
    }
    acc.finish()
}
