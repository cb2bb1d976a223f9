//! Experiment configuration: a versioned JSON document with a strict schema.
//!
//! Unknown keys are rejected everywhere, since a silently ignored typo can
//! corrupt an experiment. Loading resolves every defaulted field (for example
//! the examination curve), and the resolved form is embedded in every report.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::clicksim::{ClickSimConfig, ClickSimError};
use crate::dataset::DEFAULT_MAX_RANK;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: DataConfig,
    pub click_sim: ClickSimSpec,
    pub initial_ranker: InitialRankerSpec,
    pub method: MethodConfig,
    pub train: TrainSpec,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let mut config: ExperimentConfig = serde_json::from_str(text)?;
        config.resolve()?;
        Ok(config)
    }

    /// Fill every defaulted field with its concrete value and validate.
    pub fn resolve(&mut self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Version(self.schema_version));
        }
        if self.click_sim.rho.is_none() {
            self.click_sim.rho = Some(
                (1..=self.click_sim.max_rank)
                    .map(|i| 1.0 / i as f64)
                    .collect(),
            );
        }
        // Surface bad click-model parameters at load time.
        self.click_sim.resolve(self.data.y_max(), self.seed)?;
        if !(self.initial_ranker.fraction > 0.0 && self.initial_ranker.fraction <= 1.0) {
            return Err(ConfigError::Invalid(format!(
                "initial ranker fraction must lie in (0, 1], got {}",
                self.initial_ranker.fraction
            )));
        }
        Ok(())
    }

    pub fn to_resolved_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("unsupported schema version {0} (expected {SCHEMA_VERSION})")]
    Version(u32),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    ClickSim(#[from] ClickSimError),
}

/// Where the corpus comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    Synthetic(SyntheticDataSpec),
    Letor(LetorDataSpec),
}

impl DataConfig {
    pub fn y_max(&self) -> u32 {
        match self {
            DataConfig::Synthetic(s) => s.y_max,
            DataConfig::Letor(l) => l.y_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticDataSpec {
    pub train_queries: usize,
    #[serde(default)]
    pub validation_queries: usize,
    pub test_queries: usize,
    pub docs_per_query: usize,
    pub feature_dim: usize,
    pub y_max: u32,
    #[serde(default = "default_noise_std")]
    pub noise_std: f64,
}

fn default_noise_std() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LetorDataSpec {
    pub train_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_path: Option<PathBuf>,
    pub test_path: PathBuf,
    pub y_max: u32,
}

/// Click-simulation settings; `rho` defaults to the inverse-rank curve and is
/// always materialized in the resolved config so the curve in force is on
/// record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClickSimSpec {
    #[serde(default)]
    pub rho: Option<Vec<f64>>,
    pub eta: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_max_rank")]
    pub max_rank: usize,
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_max_rank() -> usize {
    DEFAULT_MAX_RANK
}

impl ClickSimSpec {
    pub fn resolve(&self, y_max: u32, seed: u64) -> Result<ClickSimConfig, ClickSimError> {
        match &self.rho {
            Some(rho) => ClickSimConfig::new(rho.clone(), self.eta, self.epsilon, y_max, seed),
            None => ClickSimConfig::inverse_rank(self.max_rank, self.eta, self.epsilon, y_max, seed),
        }
    }

    /// Same curve with a different severity exponent.
    pub fn resolve_with_eta(
        &self,
        eta: f64,
        y_max: u32,
        seed: u64,
    ) -> Result<ClickSimConfig, ClickSimError> {
        let mut spec = self.clone();
        spec.eta = eta;
        spec.resolve(y_max, seed)
    }
}

/// Training protocol of the weak starting ranker fit on a label fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialRankerSpec {
    /// Fraction of training queries whose judged labels may be used.
    pub fraction: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub total_steps: usize,
    /// Hidden layer sizes; empty means a linear ranker.
    #[serde(default)]
    pub hidden: Vec<usize>,
}

/// Bias-correction method under test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodConfig {
    Dla,
    NoCorrect,
    Oracle,
    RandList {
        /// Shuffled sessions used to estimate the propensity weights.
        sessions: usize,
        /// Severity exponent in force during the randomization experiment;
        /// defaults to the training eta. Setting it apart models estimates
        /// that have gone stale.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        estimation_eta: Option<f64>,
    },
    Ubm {
        iterations: usize,
        sessions_per_query: usize,
    },
    Dbn {
        iterations: usize,
        sessions_per_query: usize,
    },
}

impl MethodConfig {
    pub fn name(&self) -> &'static str {
        match self {
            MethodConfig::Dla => "dla",
            MethodConfig::NoCorrect => "no_correct",
            MethodConfig::Oracle => "oracle",
            MethodConfig::RandList { .. } => "rand_list",
            MethodConfig::Ubm { .. } => "ubm",
            MethodConfig::Dbn { .. } => "dbn",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSpec {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub total_steps: usize,
    /// Hidden layer sizes of the trained ranker; empty means linear. The
    /// default mid-range pyramid is configurable because the best width is
    /// task dependent.
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_clip: Option<f64>,
}

fn default_hidden() -> Vec<usize> {
    vec![256, 128, 64]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    #[serde(default = "default_ks")]
    pub ndcg_ks: Vec<usize>,
    #[serde(default = "default_ks")]
    pub err_ks: Vec<usize>,
    #[serde(default = "default_map_threshold")]
    pub map_threshold: u32,
    #[serde(default = "default_permutations")]
    pub permutations: usize,
}

fn default_ks() -> Vec<usize> {
    vec![1, 3, 5, 10]
}

fn default_map_threshold() -> u32 {
    1
}

fn default_permutations() -> usize {
    10_000
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            ndcg_ks: default_ks(),
            err_ks: default_ks(),
            map_threshold: default_map_threshold(),
            permutations: default_permutations(),
        }
    }
}
