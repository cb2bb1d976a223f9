//! Versioned JSON checkpoints for model parameters.
//!
//! Floats are stored as hex-encoded IEEE-754 bit patterns so a checkpoint
//! round-trips bit-exactly, which plain decimal JSON does not guarantee.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{PropensityParams, RankerArch, RankerParams};

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("bad float encoding {0:?}")]
    BadFloat(String),
    #[error("parameter count mismatch: expected {expected}, got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    arch: RankerArch,
    ranker: Vec<String>,
    propensity: Vec<String>,
}

fn encode(values: &[f64]) -> Vec<String> {
    values.iter().map(|v| format!("{:016x}", v.to_bits())).collect()
}

fn decode(values: &[String]) -> Result<Vec<f64>, CheckpointError> {
    values
        .iter()
        .map(|s| {
            u64::from_str_radix(s, 16)
                .map(f64::from_bits)
                .map_err(|_| CheckpointError::BadFloat(s.clone()))
        })
        .collect()
}

pub fn save_checkpoint(
    path: &Path,
    ranker: &RankerParams,
    propensity: &PropensityParams,
) -> Result<(), CheckpointError> {
    let file = CheckpointFile {
        version: CHECKPOINT_VERSION,
        arch: ranker.arch.clone(),
        ranker: encode(&ranker.flatten()),
        propensity: encode(&propensity.phi),
    };
    fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(RankerParams, PropensityParams), CheckpointError> {
    let file: CheckpointFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    if file.version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version(file.version));
    }
    let flat = decode(&file.ranker)?;
    let ranker = RankerParams::from_flat(file.arch, &flat).map_err(|_| {
        CheckpointError::ParamCount {
            expected: 0,
            got: flat.len(),
        }
    })?;
    let phi = decode(&file.propensity)?;
    Ok((ranker, PropensityParams::new(phi)))
}
