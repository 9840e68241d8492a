//! Closed-form ABC probabilities for the i.i.d. `±θ` model.

use crate::model::{Kernel, PerturbationSpec};

/// `P_θ(Y ∈ B^ε_y)` for `Y = ±θ` with probability ½ each.
pub fn iid_ball_probability(theta: f64, y: f64, epsilon: f64) -> f64 {
    let hit = |s: f64| if (s - y).abs() <= epsilon { 0.5 } else { 0.0 };
    hit(theta) + hit(-theta)
}

/// Exact ABC likelihood `∏_k P_θ(Y ∈ B^ε_{Ŷ_k})`.
///
/// Each factor is 0, ½ or 1, so the product is exact in floating point
/// down to `2^−1074`.
pub fn iid_abc_likelihood(theta: f64, data: &[f64], epsilon: f64) -> f64 {
    data.iter().map(|&y| iid_ball_probability(theta, y, epsilon)).product()
}

/// Log of the exact ABC likelihood: the log ball probability for the
/// indicator kernel, `log E φ((Ŷ_k − Y)/ε)` for a smooth kernel.
pub fn iid_abc_loglik(theta: f64, data: &[f64], pert: &PerturbationSpec) -> f64 {
    match &pert.kernel {
        Kernel::UniformBall => data
            .iter()
            .map(|&y| iid_ball_probability(theta, y, pert.epsilon).ln())
            .sum(),
        Kernel::Smooth(k) => data
            .iter()
            .map(|&y| {
                let a = k.log_density_1d((y - theta) / pert.epsilon);
                let b = k.log_density_1d((y + theta) / pert.epsilon);
                crate::numeric::log_sum_exp(&[a, b]) - std::f64::consts::LN_2
            })
            .sum(),
    }
}

/// Exact log-likelihood of directly observed `±θ` data (counting measure).
pub fn iid_loglik(theta: f64, data: &[f64]) -> f64 {
    iid_abc_loglik(theta, data, &PerturbationSpec::uniform(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pm_one(n: usize) -> Vec<f64> {
        (0..n).map(|i| if i % 3 == 0 { -1.0 } else { 1.0 }).collect()
    }

    #[test]
    fn zero_dominates_when_every_datum_is_within_epsilon() {
        let data = pm_one(40);
        assert_eq!(iid_abc_likelihood(0.0, &data, 1.5), 1.0);
        assert_eq!(iid_abc_likelihood(1.0, &data, 1.5), 0.5f64.powi(40));
    }

    #[test]
    fn wide_ball_captures_both_points() {
        let data = [0.7, -0.7, 0.7];
        assert_eq!(iid_abc_likelihood(0.7, &data, 1.4), 1.0);
    }

    #[test]
    fn small_ball_only_accepts_nearby_theta() {
        let data = pm_one(10);
        assert_eq!(iid_abc_likelihood(0.85, &data, 0.1), 0.0);
        assert!(iid_abc_likelihood(0.95, &data, 0.1) > 0.0);
        assert_eq!(iid_abc_likelihood(1.15, &data, 0.1), 0.0);
    }

    #[test]
    fn unperturbed_loglik_peaks_at_truth() {
        let data = pm_one(10);
        assert_eq!(iid_loglik(1.0, &data), 10.0 * 0.5f64.ln());
        assert_eq!(iid_loglik(1.1, &data), f64::NEG_INFINITY);
    }
}
