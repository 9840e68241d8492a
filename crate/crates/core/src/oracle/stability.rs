//! Forgetting of the initial condition by the exact filter.

use super::forward::{Emission, ForwardFilter};
use crate::error::{Error, Result};
use crate::model::FiniteStateModel;
use crate::sampling::Trajectory;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

const GRID_POINTS: usize = 201;

/// Total-variation distance between two probability vectors.
pub fn total_variation(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    0.5 * a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Point mass on state `i` of `k`.
pub fn point_mass(k: usize, i: usize) -> DVector<f64> {
    let mut v = DVector::zeros(k);
    v[i] = 1.0;
    v
}

/// `TV(p(x_k | y_1..y_k; init_a), p(x_k | y_1..y_k; init_b))` for `k = 1..n`.
pub fn filter_tv_forgetting<M: FiniteStateModel>(
    model: &M,
    theta: &[f64],
    data: &Trajectory,
    init_a: &DVector<f64>,
    init_b: &DVector<f64>,
) -> Result<Vec<f64>> {
    let k = model.num_states();
    if init_a.len() != k || init_b.len() != k {
        return Err(Error::Domain(format!("initial laws must have {k} entries")));
    }
    let mut fa = ForwardFilter::with_initial(model, theta, init_a.clone(), false);
    let mut fb = ForwardFilter::with_initial(model, theta, init_b.clone(), false);
    let mut out = Vec::with_capacity(data.len());
    for y in data.rows() {
        fa.step(y, Emission::Plain)?;
        fb.step(y, Emission::Plain)?;
        out.push(total_variation(&fa.state().alpha, &fb.state().alpha));
    }
    Ok(out)
}

/// Mixing constants `c̲ ≤ q, g ≤ c̄` over the observed range and the
/// contraction rate `ρ̂ = 1 − c̲²/c̄²` they imply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForgettingBound {
    pub rho: f64,
    pub c_lower: f64,
    pub c_upper: f64,
    /// Observation interval over which the emission bounds were taken.
    pub obs_range: [f64; 2],
}

impl ForgettingBound {
    /// Smallest window `L` with `ρ̂^L < tol`.
    pub fn window_for(&self, tol: f64) -> usize {
        if self.rho <= 0.0 {
            return 1;
        }
        (tol.ln() / self.rho.ln()).ceil().max(1.0) as usize
    }
}

/// Evaluate the transition entries and the emission densities on a grid
/// spanning the observed values. Only meaningful when the emission support
/// is bounded; with unbounded support the constants hold on the observed
/// range only.
pub fn forgetting_rate<M: FiniteStateModel>(model: &M, theta: &[f64], data: &Trajectory) -> Result<ForgettingBound> {
    if model.obs_dim() != 1 {
        return Err(Error::Unsupported("forgetting bounds need scalar observations".into()));
    }
    let q = model.transition_matrix(theta);
    let mut lo = q.min();
    let mut hi = q.max();
    let ys = data.observations();
    let a = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let b = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let grid = (0..GRID_POINTS).map(|i| a + (b - a) * i as f64 / (GRID_POINTS - 1) as f64);
    for y in grid.chain(ys.iter().copied()) {
        for x in 0..model.num_states() {
            let g = model
                .obs_density(theta, &x, &[y])
                .ok_or_else(|| Error::Unsupported(format!("model `{}` has no observation density", model.name())))?;
            lo = lo.min(g);
            hi = hi.max(g);
        }
    }
    Ok(ForgettingBound {
        rho: 1.0 - (lo / hi).powi(2),
        c_lower: lo,
        c_upper: hi,
        obs_range: [a, b],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BuiltinModel;
    use serde_json::json;

    #[test]
    fn identical_initial_laws_never_differ() {
        let m = BuiltinModel::from_name("finite_gaussian", &json!({})).unwrap();
        let data = Trajectory::observed(&[0.3, -0.4, 1.1]).unwrap();
        let init = DVector::from_vec(vec![0.2, 0.8]);
        let tv = filter_tv_forgetting(&m, &[1.0], &data, &init, &init).unwrap();
        assert!(tv.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rank_one_transition_forgets_in_one_step() {
        let m = BuiltinModel::from_name("finite_gaussian", &json!({"transition": [[0.3, 0.7], [0.3, 0.7]]})).unwrap();
        let data = Trajectory::observed(&[0.3, -0.4]).unwrap();
        let tv = filter_tv_forgetting(&m, &[1.0], &data, &point_mass(2, 0), &point_mass(2, 1)).unwrap();
        assert!(tv[0].abs() < 1e-15);
    }

    #[test]
    fn window_length() {
        let b = ForgettingBound {
            rho: 0.5,
            c_lower: 0.0,
            c_upper: 1.0,
            obs_range: [0.0, 1.0],
        };
        assert_eq!(b.window_for(1e-3), 10);
    }
}
