//! ranklab: a laboratory for unbiased learning to rank.
//!
//! The crate trains ranking models from position-biased clicks and evaluates
//! them against judged labels. Its centerpiece is a dual learning algorithm
//! that jointly fits an unbiased ranker and an unbiased click-propensity
//! model from raw clicks; randomization-based correction, raw-click training,
//! and EM click models (UBM, DBN) are included as baselines, along with a
//! click simulator, LETOR-format ingestion, ranking metrics, and a
//! reproducible experiment runner.

pub mod clickmodels;
pub mod clicksim;
pub mod dataset;
pub mod dla;
pub mod eval;
pub mod experiment;
pub mod models;
pub mod rng;
