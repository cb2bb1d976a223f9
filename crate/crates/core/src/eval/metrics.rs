//! Ranking quality metrics over graded labels in ranked order.

use super::EvalError;

fn gain(label: u32) -> f64 {
    2f64.powi(label as i32) - 1.0
}

fn dcg_at_k(labels: &[u32], k: usize) -> f64 {
    labels
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &y)| gain(y) / ((i + 2) as f64).log2())
        .sum()
}

/// Normalized discounted cumulative gain with gain `2^y - 1` and discount
/// `log2(i + 1)`. Defined as 0 when the ideal DCG is 0 (all labels zero).
pub fn ndcg_at_k(labels: &[u32], k: usize) -> f64 {
    let mut ideal = labels.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg_at_k(&ideal, k);
    if idcg == 0.0 {
        return 0.0;
    }
    dcg_at_k(labels, k) / idcg
}

/// Expected reciprocal rank truncated at `k`, with stopping probability
/// `R_i = (2^y - 1) / 2^y_max`.
pub fn err_at_k(labels: &[u32], k: usize, y_max: u32) -> f64 {
    let denom = 2f64.powi(y_max as i32);
    let mut err = 0.0;
    let mut not_stopped = 1.0;
    for (i, &y) in labels.iter().take(k).enumerate() {
        let r = gain(y) / denom;
        err += not_stopped * r / (i + 1) as f64;
        not_stopped *= 1.0 - r;
    }
    err
}

/// Average precision over labels binarized at `threshold` (relevant iff
/// `label >= threshold`); 0 when no document is relevant.
pub fn average_precision(labels: &[u32], threshold: u32) -> f64 {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        if y >= threshold {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    if hits == 0 {
        0.0
    } else {
        sum / hits as f64
    }
}

/// Mean squared error between estimated inverse propensity weights and the
/// true weights `rho_1^eta / rho_i^eta`.
pub fn propensity_mse(
    estimated_weights: &[f64],
    true_rho: &[f64],
    eta: f64,
) -> Result<f64, EvalError> {
    if estimated_weights.len() != true_rho.len() {
        return Err(EvalError::LengthMismatch {
            left: estimated_weights.len(),
            right: true_rho.len(),
        });
    }
    let top = true_rho[0].powf(eta);
    let sum: f64 = estimated_weights
        .iter()
        .zip(true_rho)
        .map(|(w, rho)| {
            let truth = top / rho.powf(eta);
            (w - truth).powi(2)
        })
        .sum();
    Ok(sum / estimated_weights.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ndcg_of_perfect_order_is_one() {
        assert_eq!(ndcg_at_k(&[4, 3, 2, 1, 0], 5), 1.0);
    }

    // Hand-derived: labels (0, 4), k = 2: DCG = 15 / log2(3), IDCG = 15.
    #[test]
    fn ndcg_hand_value() {
        let expected = (15.0 / 3f64.log2()) / 15.0;
        assert!((ndcg_at_k(&[0, 4], 2) - expected).abs() < 1e-12);
        assert!((expected - 0.6309).abs() < 1e-4);
    }

    #[test]
    fn ndcg_of_all_zero_labels_is_zero() {
        assert_eq!(ndcg_at_k(&[0, 0, 0], 3), 0.0);
    }

    // Hand-derived: single doc at y = y_max = 4: ERR@1 = 15/16.
    #[test]
    fn err_hand_value() {
        assert!((err_at_k(&[4], 1, 4) - 0.9375).abs() < 1e-15);
    }

    #[test]
    fn err_of_all_zero_labels_is_zero() {
        assert_eq!(err_at_k(&[0, 0], 2, 4), 0.0);
    }

    #[test]
    fn err_prefers_more_relevance_below_the_top() {
        assert!(err_at_k(&[4, 4], 2, 4) > err_at_k(&[4, 0], 2, 4));
    }

    #[test]
    fn ap_of_all_relevant_is_one() {
        assert_eq!(average_precision(&[3, 1, 2], 1), 1.0);
    }

    // Hand-derived: binarized (1, 0, 1): AP = (1/1 + 2/3) / 2.
    #[test]
    fn ap_hand_value() {
        let expected = (1.0 + 2.0 / 3.0) / 2.0;
        assert!((average_precision(&[1, 0, 1], 1) - expected).abs() < 1e-15);
        assert!((expected - 0.8333).abs() < 1e-4);
    }

    #[test]
    fn ap_without_relevant_docs_is_zero() {
        assert_eq!(average_precision(&[0, 0], 1), 0.0);
    }

    #[test]
    fn propensity_mse_values() {
        assert_eq!(propensity_mse(&[1.0, 2.0], &[1.0, 0.5], 1.0).unwrap(), 0.0);
        assert_eq!(propensity_mse(&[1.0, 3.0], &[1.0, 0.5], 1.0).unwrap(), 0.5);
        assert!(matches!(
            propensity_mse(&[1.0], &[1.0, 0.5], 1.0),
            Err(EvalError::LengthMismatch { .. })
        ));
    }

    // Moving a relevant document up past a less relevant one never hurts,
    // checked exhaustively on 4-doc lists.
    #[test]
    fn metrics_monotone_under_improving_swaps() {
        let grades = [0u32, 1, 2, 3, 4];
        for &a in &grades {
            for &b in &grades {
                for &c in &grades {
                    for &d in &grades {
                        let labels = [a, b, c, d];
                        for i in 0..3 {
                            if labels[i] < labels[i + 1] {
                                let mut better = labels;
                                better.swap(i, i + 1);
                                for k in 1..=4 {
                                    assert!(
                                        ndcg_at_k(&better, k) >= ndcg_at_k(&labels, k) - 1e-12
                                    );
                                    assert!(
                                        err_at_k(&better, k, 4) >= err_at_k(&labels, k, 4) - 1e-12
                                    );
                                }
                                assert!(
                                    average_precision(&better, 1)
                                        >= average_precision(&labels, 1) - 1e-12
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    proptest! {
        // Swapping equal-label documents never changes any metric.
        #[test]
        fn equal_label_swaps_are_invisible(
            labels in prop::collection::vec(0u32..=4, 2..8),
            i in 0usize..8,
            j in 0usize..8,
        ) {
            let i = i % labels.len();
            let j = j % labels.len();
            prop_assume!(labels[i] == labels[j]);
            let mut swapped = labels.clone();
            swapped.swap(i, j);
            for k in 1..=labels.len() {
                prop_assert!((ndcg_at_k(&labels, k) - ndcg_at_k(&swapped, k)).abs() < 1e-12);
                prop_assert!((err_at_k(&labels, k, 4) - err_at_k(&swapped, k, 4)).abs() < 1e-12);
            }
            prop_assert!(
                (average_precision(&labels, 1) - average_precision(&swapped, 1)).abs() < 1e-12
            );
        }

        #[test]
        fn metrics_stay_in_unit_interval(
            labels in prop::collection::vec(0u32..=4, 1..10),
            k in 1usize..12,
        ) {
            let ndcg = ndcg_at_k(&labels, k);
            let err = err_at_k(&labels, k, 4);
            let ap = average_precision(&labels, 1);
            prop_assert!((0.0..=1.0).contains(&ndcg));
            prop_assert!((0.0..=1.0).contains(&err));
            prop_assert!((0.0..=1.0).contains(&ap));
        }
    }
}
