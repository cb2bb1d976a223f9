//! Synthetic corpus generator with a known linear relevance signal.
//!
//! Labels follow `grade = clamp(round(y_max * sigmoid(w·x + noise)))` for a
//! generating weight vector `w` that is recorded in the dataset metadata, so
//! an oracle ranker exists by construction.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{Dataset, DatasetError, Document, GeneratorInfo, Query, Split};
use crate::rng::{derive_rng, stream};

/// Scale applied to the generating weights so that sigmoid scores spread over
/// the whole grade range instead of clustering around the middle grades.
const WEIGHT_SCALE: f64 = 2.5;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_queries: usize,
    pub docs_per_query: usize,
    pub feature_dim: usize,
    pub y_max: u32,
    pub seed: u64,
    /// Standard deviation of the label noise added to `w·x`.
    pub noise_std: f64,
    /// Which split to label the output with.
    pub split: Split,
    /// Sub-stream index: datasets with equal `seed` but distinct `stream`
    /// share the generating weights while drawing disjoint documents. Used to
    /// produce train/validation/test splits of one corpus.
    pub stream: u64,
}

impl SyntheticConfig {
    pub fn new(
        n_queries: usize,
        docs_per_query: usize,
        feature_dim: usize,
        y_max: u32,
        seed: u64,
    ) -> Self {
        SyntheticConfig {
            n_queries,
            docs_per_query,
            feature_dim,
            y_max,
            seed,
            noise_std: 0.5,
            split: Split::Train,
            stream: 0,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Generate a synthetic dataset. Pure in the whole config: equal inputs give
/// bitwise-identical outputs.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Dataset, DatasetError> {
    assert!(config.n_queries > 0, "n_queries must be positive");
    assert!(config.docs_per_query > 0, "docs_per_query must be positive");
    assert!(config.feature_dim > 0, "feature_dim must be positive");
    assert!(config.y_max > 0, "y_max must be positive");
    assert!(config.noise_std >= 0.0, "noise_std must be nonnegative");

    let mut weight_rng = derive_rng(config.seed, stream::SYNTHETIC_WEIGHTS, 0);
    let raw: Vec<f64> = (0..config.feature_dim)
        .map(|_| StandardNormal.sample(&mut weight_rng))
        .collect();
    let norm = raw.iter().map(|w| w * w).sum::<f64>().sqrt().max(1e-12);
    let weights: Vec<f64> = raw.iter().map(|w| w / norm * WEIGHT_SCALE).collect();

    let mut doc_rng = derive_rng(config.seed, stream::SYNTHETIC_DOCS, config.stream);
    let noise = Normal::new(0.0, config.noise_std).expect("valid noise std");

    let queries = (0..config.n_queries)
        .map(|qi| {
            let documents = (0..config.docs_per_query)
                .map(|di| {
                    let features: Vec<f64> = (0..config.feature_dim)
                        .map(|_| StandardNormal.sample(&mut doc_rng))
                        .collect();
                    let signal: f64 = weights
                        .iter()
                        .zip(&features)
                        .map(|(w, x)| w * x)
                        .sum::<f64>()
                        + if config.noise_std > 0.0 {
                            noise.sample(&mut doc_rng)
                        } else {
                            // Keep the rng cadence identical so noise_std=0 only
                            // changes labels, not feature draws.
                            let _: f64 = doc_rng.gen();
                            0.0
                        };
                    let grade = (config.y_max as f64 * sigmoid(signal)).round();
                    let label = grade.clamp(0.0, config.y_max as f64) as u32;
                    Document {
                        doc_id: format!("d{di}"),
                        features,
                        label,
                    }
                })
                .collect();
            Query {
                query_id: format!("q{qi}"),
                documents,
            }
        })
        .collect();

    let mut dataset = Dataset::new(queries, config.feature_dim, config.y_max, config.split)?;
    dataset.generator = Some(GeneratorInfo {
        weights,
        noise_std: config.noise_std,
    });
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_given_seed() {
        let cfg = SyntheticConfig::new(100, 10, 20, 4, 7);
        let a = generate_synthetic(&cfg).unwrap();
        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_doc_queries() {
        let cfg = SyntheticConfig::new(5, 1, 3, 4, 1);
        let ds = generate_synthetic(&cfg).unwrap();
        assert!(ds.queries.iter().all(|q| q.documents.len() == 1));
    }

    // Oracle computed by counting grades in one generated corpus: with 10k
    // documents every grade in 0..=4 occurs.
    #[test]
    fn label_histogram_is_non_degenerate() {
        let cfg = SyntheticConfig::new(1000, 10, 20, 4, 7);
        let ds = generate_synthetic(&cfg).unwrap();
        let mut counts = [0usize; 5];
        for q in &ds.queries {
            for d in &q.documents {
                counts[d.label as usize] += 1;
            }
        }
        assert_eq!(counts.iter().sum::<usize>(), 10_000);
        for (grade, count) in counts.iter().enumerate() {
            assert!(*count > 0, "grade {grade} never occurs: {counts:?}");
        }
    }

    #[test]
    fn streams_share_weights_but_not_documents() {
        let mut cfg = SyntheticConfig::new(10, 5, 8, 4, 42);
        let train = generate_synthetic(&cfg).unwrap();
        cfg.stream = 1;
        cfg.split = Split::Test;
        let test = generate_synthetic(&cfg).unwrap();
        assert_eq!(
            train.generator.as_ref().unwrap().weights,
            test.generator.as_ref().unwrap().weights
        );
        assert_ne!(
            train.queries[0].documents[0].features,
            test.queries[0].documents[0].features
        );
    }

    #[test]
    fn different_seeds_differ() {
        let a = generate_synthetic(&SyntheticConfig::new(10, 5, 8, 4, 1)).unwrap();
        let b = generate_synthetic(&SyntheticConfig::new(10, 5, 8, 4, 2)).unwrap();
        assert_ne!(a, b);
    }
}
