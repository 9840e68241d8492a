//! Chambers–Mallows–Stuck sampling of α-stable laws.
//!
//! Parameterisation `S(α, β, σ, δ; 1)`: characteristic function
//! `exp(−σ^α|t|^α (1 − iβ sgn(t) tan(πα/2)) + iδt)` for α ≠ 1 and
//! `exp(−σ|t| (1 + iβ (2/π) sgn(t) log|t|) + iδt)` for α = 1. At α = 2 the
//! law is `N(δ, 2σ²)`. The α = 1 branch uses the logarithmic CMS form, so the
//! family is discontinuous at α = 1 when β ≠ 0 (as this parameterisation is).

use crate::error::{Error, Result};
use crate::rng::SimRng;
use rand::Rng;
use rand_distr::Exp1;
use std::f64::consts::{FRAC_PI_2, PI};

/// One draw from `S(α, β, σ, δ; 1)`.
pub fn alpha_stable(alpha: f64, beta: f64, sigma: f64, delta: f64, rng: &mut SimRng) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 2], got {alpha}")));
    }
    if !(-1.0..=1.0).contains(&beta) {
        return Err(Error::Domain(format!("beta must lie in [-1, 1], got {beta}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    // V ~ U(−π/2, π/2), excluding the endpoints; W ~ Exp(1).
    let v = loop {
        let v = PI * (rng.random::<f64>() - 0.5);
        if v.abs() < FRAC_PI_2 {
            break v;
        }
    };
    let w: f64 = loop {
        let w: f64 = rng.sample(Exp1);
        if w > 0.0 {
            break w;
        }
    };

    if alpha == 1.0 {
        let a = FRAC_PI_2 + beta * v;
        let x = (a * v.tan() - beta * (FRAC_PI_2 * w * v.cos() / a).ln()) / FRAC_PI_2;
        return Ok(sigma * x + beta * sigma * sigma.ln() / FRAC_PI_2 + delta);
    }

    let tan = (PI * alpha / 2.0).tan();
    let b = (beta * tan).atan() / alpha;
    let s = (1.0 + beta * beta * tan * tan).powf(1.0 / (2.0 * alpha));
    let x = s * (alpha * (v + b)).sin() / v.cos().powf(1.0 / alpha)
        * ((v - alpha * (v + b)).cos() / w).powf((1.0 - alpha) / alpha);
    Ok(sigma * x + delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, StreamKey};

    #[test]
    fn rejects_bad_parameters() {
        let mut rng = StreamKey::new(1, Purpose::Test).rng();
        assert!(alpha_stable(0.0, 0.0, 1.0, 0.0, &mut rng).is_err());
        assert!(alpha_stable(2.1, 0.0, 1.0, 0.0, &mut rng).is_err());
        assert!(alpha_stable(1.5, 1.5, 1.0, 0.0, &mut rng).is_err());
        assert!(alpha_stable(1.5, 0.0, 0.0, 0.0, &mut rng).is_err());
    }

    #[test]
    fn draws_are_finite_across_the_range() {
        let mut rng = StreamKey::new(2, Purpose::Test).rng();
        for &alpha in &[0.5, 1.0, 1.3, 1.8, 2.0] {
            for &beta in &[-1.0, 0.0, 0.7] {
                for _ in 0..2000 {
                    assert!(alpha_stable(alpha, beta, 1.5, -0.3, &mut rng).unwrap().is_finite());
                }
            }
        }
    }

    #[test]
    fn totally_skewed_half_is_positive() {
        // α < 1, β = 1: support is [δ, ∞)
        let mut rng = StreamKey::new(3, Purpose::Test).rng();
        for _ in 0..5000 {
            assert!(alpha_stable(0.5, 1.0, 1.0, 0.0, &mut rng).unwrap() >= 0.0);
        }
    }
}
