//! Joint SGD on the IPW ranking loss and IRW propensity loss, plus the
//! fixed-weight baseline trainers.
//!
//! Each step samples a batch of queries, draws fresh clicks for them, and
//! applies simultaneous descent steps: the ranker learns from the
//! propensity-weighted loss, the propensity table from the relevance-weighted
//! loss. Per-query gradients within a batch are computed in fixed-size chunks
//! that may run concurrently and are reduced in chunk order, so a seed fully
//! determines the result regardless of thread count.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clicksim::{sample_session, ClickSimConfig};
use crate::dataset::{Query, RankedList};
use crate::models::{
    propensity_distribution, score_documents, score_gradients, softmax_over_list,
    PropensityParams, RankerGradients, RankerParams,
};
use crate::rng::{derive_rng, stream};

use super::loss::{inverse_weights, weighted_softmax_loss, weighted_softmax_loss_gradient};
use super::DlaError;

/// Queries per gradient chunk; fixed so reductions are schedule-independent.
const CHUNK: usize = 32;

/// One query of a training corpus: its presented list with features and
/// labels gathered in list order.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedQuery {
    pub query_id: String,
    pub doc_ids: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u32>,
}

impl RankedQuery {
    /// Gather features and labels of a query in the order of a ranked list.
    pub fn from_list(query: &Query, list: &RankedList) -> Result<Self, DlaError> {
        let mut features = Vec::with_capacity(list.len());
        let mut labels = Vec::with_capacity(list.len());
        for doc_id in &list.doc_ids {
            let idx = query
                .doc_index(doc_id)
                .ok_or_else(|| DlaError::UnknownDoc {
                    query_id: query.query_id.clone(),
                    doc_id: doc_id.clone(),
                })?;
            features.push(query.documents[idx].features.clone());
            labels.push(query.documents[idx].label);
        }
        Ok(RankedQuery {
            query_id: query.query_id.clone(),
            doc_ids: list.doc_ids.clone(),
            features,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn ranked_list(&self) -> RankedList {
        RankedList {
            query_id: self.query_id.clone(),
            doc_ids: self.doc_ids.clone(),
        }
    }
}

/// Supplies per-position click indicators for a sampled query.
///
/// Values are 0/1 for sampled clicks; soft values in [0, 1] are allowed and
/// act as per-position weights (used when training on click-model relevance
/// signals).
pub trait ClickSource: Sync {
    fn sample(&self, query: &RankedQuery, rng: &mut ChaCha8Rng) -> Vec<f64>;
}

/// Samples clicks on the fly from the position-bias click model.
pub struct SimulatedClicks {
    pub config: ClickSimConfig,
}

impl ClickSource for SimulatedClicks {
    fn sample(&self, query: &RankedQuery, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let session = sample_session(&query.ranked_list(), &query.labels, &self.config, rng)
            .expect("corpus lists fit the click model");
        session.clicks.iter().map(|&c| c as u8 as f64).collect()
    }
}

/// Replays fixed per-document weights; deterministic across steps.
pub struct FixedSignalClicks {
    pub signals: std::collections::BTreeMap<(String, String), f64>,
}

impl ClickSource for FixedSignalClicks {
    fn sample(&self, query: &RankedQuery, _rng: &mut ChaCha8Rng) -> Vec<f64> {
        query
            .doc_ids
            .iter()
            .map(|d| {
                self.signals
                    .get(&(query.query_id.clone(), d.clone()))
                    .copied()
                    .unwrap_or(0.0)
            })
            .collect()
    }
}

/// How click weights are derived during training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrainMode {
    /// Joint training: ranker weighted by the propensity model, propensity
    /// table weighted by the ranker.
    Dla,
    /// Raw clicks, no correction.
    NoCorrect,
    /// Clicks weighted by a fixed per-position inverse-propensity vector,
    /// e.g. one recovered from result randomization.
    FixedWeights(Vec<f64>),
    /// Ignore clicks entirely: every document with `label > 0` counts as
    /// clicked, the full-information upper bound.
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub total_steps: usize,
    pub seed: u64,
    /// Cap on inverse weights; off by default.
    pub weight_clip: Option<f64>,
    pub mode: TrainMode,
    /// Keep the ranker fixed and train only the propensity table. Used for
    /// convergence analysis against an oracle scorer.
    pub freeze_ranker: bool,
}

impl TrainConfig {
    pub fn new(
        mode: TrainMode,
        learning_rate: f64,
        batch_size: usize,
        total_steps: usize,
        seed: u64,
    ) -> Self {
        TrainConfig {
            learning_rate,
            batch_size,
            total_steps,
            seed,
            weight_clip: None,
            mode,
            freeze_ranker: false,
        }
    }

    fn validate(&self) -> Result<(), DlaError> {
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(DlaError::BadConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(DlaError::BadConfig("batch size must be at least 1".into()));
        }
        if let Some(clip) = self.weight_clip {
            if !clip.is_finite() || clip < 1.0 {
                return Err(DlaError::BadConfig(format!(
                    "weight clip must be at least 1, got {clip}"
                )));
            }
        }
        if let TrainMode::FixedWeights(w) = &self.mode {
            if w.is_empty() || w.iter().any(|x| !x.is_finite() || *x <= 0.0) {
                return Err(DlaError::BadConfig(
                    "fixed weights must be nonempty and positive".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Trained parameters with their per-step loss traces.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPair {
    pub ranker: RankerParams,
    pub propensity: PropensityParams,
    pub rank_loss_trace: Vec<f64>,
    pub prop_loss_trace: Vec<f64>,
}

impl TrainedPair {
    /// CSV with one row per step: `step,rank_loss,prop_loss`.
    pub fn loss_trace_csv(&self) -> String {
        let mut out = String::from("step,rank_loss,prop_loss\n");
        for (step, (r, p)) in self
            .rank_loss_trace
            .iter()
            .zip(&self.prop_loss_trace)
            .enumerate()
        {
            out.push_str(&format!("{step},{r},{p}\n"));
        }
        out
    }
}

struct BatchItem {
    query_idx: usize,
    clicks: Vec<f64>,
}

struct ChunkGrads {
    theta: RankerGradients,
    phi: Vec<f64>,
    rank_loss: f64,
    prop_loss: f64,
}

/// Train ranker and propensity model jointly (mode `Dla`), or the ranker
/// alone under fixed weights (the baseline modes, where the propensity table
/// is returned unchanged and its loss trace stays zero). Deterministic given
/// the seed.
pub fn dla_train(
    corpus: &[RankedQuery],
    clicks: &dyn ClickSource,
    ranker: RankerParams,
    propensity: PropensityParams,
    config: &TrainConfig,
) -> Result<TrainedPair, DlaError> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(DlaError::EmptyCorpus);
    }
    let max_rank = propensity.max_rank();
    for q in corpus {
        if q.is_empty() {
            return Err(DlaError::BadConfig(format!("query {} has an empty list", q.query_id)));
        }
        if q.len() > max_rank {
            return Err(DlaError::BadConfig(format!(
                "query {} list length {} exceeds propensity table size {max_rank}",
                q.query_id,
                q.len()
            )));
        }
        if let TrainMode::FixedWeights(w) = &config.mode {
            if q.len() > w.len() {
                return Err(DlaError::BadConfig(format!(
                    "query {} list length {} exceeds fixed weight vector length {}",
                    q.query_id,
                    q.len(),
                    w.len()
                )));
            }
        }
    }

    let mut ranker = ranker;
    let mut propensity = propensity;
    let mut rank_loss_trace = Vec::with_capacity(config.total_steps);
    let mut prop_loss_trace = Vec::with_capacity(config.total_steps);
    let mut rng = derive_rng(config.seed, stream::TRAINING, 0);
    let scale = 1.0 / config.batch_size as f64;

    for step in 0..config.total_steps {
        // Draw the batch and its clicks sequentially so the rng cadence does
        // not depend on how gradient work is scheduled.
        let batch: Vec<BatchItem> = (0..config.batch_size)
            .map(|_| {
                let query_idx = rng.gen_range(0..corpus.len());
                let clicks = match &config.mode {
                    TrainMode::Oracle => corpus[query_idx]
                        .labels
                        .iter()
                        .map(|&y| (y > 0) as u8 as f64)
                        .collect(),
                    _ => clicks.sample(&corpus[query_idx], &mut rng),
                };
                BatchItem { query_idx, clicks }
            })
            .collect();

        let chunks: Vec<ChunkGrads> = batch
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut grads = ChunkGrads {
                    theta: RankerGradients::zeros(&ranker.arch),
                    phi: vec![0.0; max_rank],
                    rank_loss: 0.0,
                    prop_loss: 0.0,
                };
                for item in chunk {
                    accumulate_query(
                        &corpus[item.query_idx],
                        &item.clicks,
                        &ranker,
                        &propensity,
                        config,
                        &mut grads,
                    )
                    .expect("corpus validated before training");
                }
                grads
            })
            .collect();

        let mut theta_grad = RankerGradients::zeros(&ranker.arch);
        let mut phi_grad = vec![0.0; max_rank];
        let mut rank_loss = 0.0;
        let mut prop_loss = 0.0;
        for chunk in chunks {
            theta_grad.add_assign(&chunk.theta);
            for (a, b) in phi_grad.iter_mut().zip(&chunk.phi) {
                *a += b;
            }
            rank_loss += chunk.rank_loss;
            prop_loss += chunk.prop_loss;
        }
        rank_loss *= scale;
        prop_loss *= scale;

        if !rank_loss.is_finite() || !prop_loss.is_finite() {
            return Err(DlaError::Diverged { step, rank_loss, prop_loss });
        }

        if !config.freeze_ranker {
            theta_grad.scale(scale);
            ranker.apply_step(&theta_grad, -config.learning_rate);
        }
        if matches!(config.mode, TrainMode::Dla) {
            for (phi, g) in propensity.phi.iter_mut().zip(&phi_grad) {
                *phi -= config.learning_rate * scale * g;
            }
        }

        rank_loss_trace.push(rank_loss);
        prop_loss_trace.push(prop_loss);
    }

    Ok(TrainedPair {
        ranker,
        propensity,
        rank_loss_trace,
        prop_loss_trace,
    })
}

fn accumulate_query(
    query: &RankedQuery,
    clicks: &[f64],
    ranker: &RankerParams,
    propensity: &PropensityParams,
    config: &TrainConfig,
    grads: &mut ChunkGrads,
) -> Result<(), DlaError> {
    let n = query.len();
    let scores = score_documents(ranker, &query.features)?;
    let rank_dist = softmax_over_list(&scores)?;

    // Inverse weights on clicked positions for the ranking loss.
    let rank_weights: Vec<f64> = match &config.mode {
        TrainMode::Dla => {
            let prop_dist = propensity_distribution(propensity, n)?;
            let inv = inverse_weights(prop_dist.probs(), config.weight_clip)?;
            clicks.iter().zip(&inv).map(|(c, w)| c * w).collect()
        }
        TrainMode::NoCorrect | TrainMode::Oracle => clicks.to_vec(),
        TrainMode::FixedWeights(weights) => clicks
            .iter()
            .zip(weights)
            .map(|(c, w)| {
                let capped = match config.weight_clip {
                    Some(clip) => w.min(clip),
                    None => *w,
                };
                c * capped
            })
            .collect(),
    };

    grads.rank_loss += weighted_softmax_loss(&rank_dist, &rank_weights)?;
    if !config.freeze_ranker {
        let upstream = weighted_softmax_loss_gradient(&rank_dist, &rank_weights);
        let theta = score_gradients(ranker, &query.features, &upstream)?;
        grads.theta.add_assign(&theta);
    }

    if matches!(config.mode, TrainMode::Dla) {
        let prop_dist = propensity_distribution(propensity, n)?;
        let inv_rel = inverse_weights(rank_dist.probs(), config.weight_clip)?;
        let prop_weights: Vec<f64> = clicks.iter().zip(&inv_rel).map(|(c, w)| c * w).collect();
        grads.prop_loss += weighted_softmax_loss(&prop_dist, &prop_weights)?;
        let phi_grad = weighted_softmax_loss_gradient(&prop_dist, &prop_weights);
        for (g, d) in grads.phi.iter_mut().zip(&phi_grad) {
            *g += d;
        }
    }
    Ok(())
}

/// Train a ranker under a fixed weighting scheme. `NoCorrect` weights every
/// click by 1, `FixedWeights` applies a per-position vector, and `Oracle`
/// trains the plain loss on true labels.
pub fn baseline_train(
    corpus: &[RankedQuery],
    clicks: &dyn ClickSource,
    ranker: RankerParams,
    config: &TrainConfig,
) -> Result<RankerParams, DlaError> {
    if matches!(config.mode, TrainMode::Dla) {
        return Err(DlaError::BadConfig(
            "baseline_train requires a baseline mode, not Dla".into(),
        ));
    }
    let max_rank = corpus.iter().map(RankedQuery::len).max().unwrap_or(1);
    let pair = dla_train(
        corpus,
        clicks,
        ranker,
        PropensityParams::zeros(max_rank),
        config,
    )?;
    Ok(pair.ranker)
}
