//! Stationarity check for the propensity table under a fixed ranker.
//!
//! With the ranker frozen, the expected gradient of the propensity loss at
//! position `i` is `g_i * sum_j m_j - m_i`, where `m_i` is the mean over
//! sessions of `c_i * f_1 / f_i` (click indicator times the inverse relevance
//! weight). The table is stationary exactly when `g_i` is proportional to
//! `m_i`, so the maximum absolute gradient entry doubles as a convergence
//! residual.

use crate::models::{propensity_distribution, ListDistribution, PropensityParams};

use super::DlaError;

/// Per-position mean of `c_i * f_1 / f_i` over a session corpus.
///
/// Click entries may be expectations rather than 0/1 draws, so the same
/// routine serves both sampled corpora and enumerated click distributions.
/// All sessions must share one list length.
pub fn weighted_click_mean(
    clicks: &[Vec<f64>],
    rank_dists: &[ListDistribution],
) -> Result<Vec<f64>, DlaError> {
    if clicks.is_empty() || clicks.len() != rank_dists.len() {
        return Err(DlaError::Misaligned {
            distribution: rank_dists.len(),
            clicks: clicks.len(),
        });
    }
    let n = rank_dists[0].len();
    let mut mean = vec![0.0; n];
    for (c, dist) in clicks.iter().zip(rank_dists) {
        if c.len() != n || dist.len() != n {
            return Err(DlaError::Misaligned {
                distribution: dist.len(),
                clicks: c.len(),
            });
        }
        let f = dist.probs();
        for i in 0..n {
            mean[i] += c[i] * f[0] / f[i];
        }
    }
    let count = clicks.len() as f64;
    for m in &mut mean {
        *m /= count;
    }
    Ok(mean)
}

/// Maximum absolute stationarity residual of `phi` against aggregated
/// click statistics.
pub fn fixed_point_residual(
    phi: &PropensityParams,
    clicks: &[Vec<f64>],
    rank_dists: &[ListDistribution],
) -> Result<f64, DlaError> {
    let mean = weighted_click_mean(clicks, rank_dists)?;
    let g = propensity_distribution(phi, mean.len())?;
    Ok(residual_from_distribution(g.probs(), &mean))
}

/// Residual for an explicit propensity distribution.
pub fn residual_from_distribution(g: &[f64], weighted_click_mean: &[f64]) -> f64 {
    let total: f64 = weighted_click_mean.iter().sum();
    g.iter()
        .zip(weighted_click_mean)
        .map(|(gi, mi)| (gi * total - mi).abs())
        .fold(0.0, f64::max)
}

/// Closed-form stationary distribution `g_i = m_i / sum_j m_j`.
pub fn fixed_point_solution(weighted_click_mean: &[f64]) -> Result<Vec<f64>, DlaError> {
    let total: f64 = weighted_click_mean.iter().sum();
    if weighted_click_mean.is_empty() || !total.is_finite() || total <= 0.0 {
        return Err(DlaError::BadConfig(
            "weighted click mean must have positive total mass".into(),
        ));
    }
    Ok(weighted_click_mean.iter().map(|m| m / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::softmax_over_list;

    #[test]
    fn plugged_in_solution_has_negligible_residual() {
        let dists = vec![
            softmax_over_list(&[1.2, 0.3, -0.5]).unwrap(),
            softmax_over_list(&[0.1, 0.9, 0.0]).unwrap(),
        ];
        let clicks = vec![vec![1.0, 0.0, 1.0], vec![0.25, 0.5, 0.75]];
        let mean = weighted_click_mean(&clicks, &dists).unwrap();
        let solution = fixed_point_solution(&mean).unwrap();

        assert!(residual_from_distribution(&solution, &mean) < 1e-9);

        // phi = ln(solution) softmaxes back to the solution.
        let phi = PropensityParams::new(solution.iter().map(|g| g.ln()).collect());
        let residual = fixed_point_residual(&phi, &clicks, &dists).unwrap();
        assert!(residual < 1e-9, "residual {residual}");
    }

    #[test]
    fn uniform_clicks_and_scores_are_stationary_at_uniform_g() {
        let dists = vec![softmax_over_list(&[0.0, 0.0, 0.0]).unwrap(); 4];
        let clicks = vec![vec![0.5, 0.5, 0.5]; 4];
        let phi = PropensityParams::zeros(3);
        let residual = fixed_point_residual(&phi, &clicks, &dists).unwrap();
        assert!(residual < 1e-15);
    }

    #[test]
    fn off_solution_tables_have_positive_residual() {
        let dists = vec![softmax_over_list(&[1.0, 0.0]).unwrap()];
        let clicks = vec![vec![1.0, 0.2]];
        let phi = PropensityParams::zeros(2);
        let residual = fixed_point_residual(&phi, &clicks, &dists).unwrap();
        assert!(residual > 1e-3);
    }

    #[test]
    fn mismatched_session_shapes_rejected() {
        let dists = vec![softmax_over_list(&[0.0, 0.0]).unwrap()];
        let clicks = vec![vec![1.0, 0.0, 0.0]];
        assert!(matches!(
            weighted_click_mean(&clicks, &dists),
            Err(DlaError::Misaligned { .. })
        ));
    }
}
