//! Experiment orchestration: configuration, the end-to-end pipeline, and
//! parameter sweeps.

mod config;
mod runner;
mod sweep;

pub use config::{
    ClickSimSpec, ConfigError, DataConfig, ExperimentConfig, InitialRankerSpec, LetorDataSpec,
    MethodConfig, MetricsConfig, SyntheticDataSpec, TrainSpec, SCHEMA_VERSION,
};
pub use runner::{
    evaluate_checkpoint, run_experiment, simulate_click_log, ExperimentError, ExperimentOutcome,
    RunReport, Stage,
};
pub use sweep::{run_sweep, Grid, SweepRow, SweepTable};
