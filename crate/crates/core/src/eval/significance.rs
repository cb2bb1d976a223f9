//! Paired sign-flip randomization test.

use rand::Rng;

use super::EvalError;
use crate::rng::{derive_rng, stream};

/// Two-sided Fisher randomization test on paired per-query metrics.
///
/// Randomly flips the sign of each per-query difference and reports the
/// proportion of permutations whose absolute mean reaches the observed one.
/// Deterministic given the seed.
pub fn fisher_randomization_test(
    metric_a: &[f64],
    metric_b: &[f64],
    permutations: usize,
    seed: u64,
) -> Result<f64, EvalError> {
    if metric_a.len() != metric_b.len() {
        return Err(EvalError::LengthMismatch {
            left: metric_a.len(),
            right: metric_b.len(),
        });
    }
    if metric_a.is_empty() {
        return Err(EvalError::Empty);
    }
    if permutations == 0 {
        return Err(EvalError::NoPermutations);
    }
    let diffs: Vec<f64> = metric_a.iter().zip(metric_b).map(|(a, b)| a - b).collect();
    let n = diffs.len() as f64;
    let observed = (diffs.iter().sum::<f64>() / n).abs();

    let mut rng = derive_rng(seed, stream::SIGNIFICANCE, 0);
    let mut hits = 0usize;
    for _ in 0..permutations {
        let mut total = 0.0;
        for &d in &diffs {
            total += if rng.gen_bool(0.5) { d } else { -d };
        }
        if (total / n).abs() >= observed - 1e-12 {
            hits += 1;
        }
    }
    Ok(hits as f64 / permutations as f64)
}
