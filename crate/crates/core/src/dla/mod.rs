//! The dual learning algorithm: unbiased ranking and unbiased propensity
//! estimation trained jointly from raw clicks, plus the fixed-weight
//! baselines it is compared against.

use thiserror::Error;

mod fixed_point;
mod loss;
mod trainer;

pub use fixed_point::{
    fixed_point_residual, fixed_point_solution, residual_from_distribution, weighted_click_mean,
};
pub use loss::{
    ipw_rank_loss, irw_propensity_loss, plain_softmax_loss, weighted_softmax_loss,
    weighted_softmax_loss_gradient,
};
pub use trainer::{
    baseline_train, dla_train, ClickSource, FixedSignalClicks, RankedQuery, SimulatedClicks,
    TrainConfig, TrainMode, TrainedPair,
};

use crate::models::ModelError;

#[derive(Debug, Error)]
pub enum DlaError {
    #[error("distribution length {distribution} does not match clicks length {clicks}")]
    Misaligned { distribution: usize, clicks: usize },
    #[error("weight source must be positive, got {value}")]
    NonPositiveWeightSource { value: f64 },
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("ranked list for query {query_id} references unknown document {doc_id}")]
    UnknownDoc { query_id: String, doc_id: String },
    #[error("training diverged at step {step}: rank loss {rank_loss}, propensity loss {prop_loss}")]
    Diverged {
        step: usize,
        rank_loss: f64,
        prop_loss: f64,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}
