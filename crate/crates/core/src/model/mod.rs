//! Hidden Markov model abstraction, parameter spaces and built-in models.
//!
//! A model is anything implementing [`HiddenMarkovModel`]: it must be able to
//! sample its hidden chain and observations, and it may optionally expose an
//! observation density (and, for scalar observations, a CDF). Models with a
//! finite hidden state space additionally implement [`FiniteStateModel`],
//! which is what the exact forward-algorithm oracles require.

mod builtin;
mod perturb;
mod summary;

pub use builtin::{
    BuiltinModel, FiniteGaussian, FiniteGaussianHyper, GaussianParameterization, IidPmTheta,
    ModelConfig, TwoStateAlphaStable,
};
pub use perturb::{
    ball_volume, perturb_model, BallNorm, Kernel, PerturbationSpec, Perturbed, SmoothKernel,
};
pub use summary::{apply_summary, Summarized, Summary};

use crate::error::{Error, Result};
use crate::rng::SimRng;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Closed coordinate-wise bounds describing the compact parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterBox {
    bounds: Vec<[f64; 2]>,
}

impl ParameterBox {
    pub fn new(bounds: Vec<[f64; 2]>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::config("theta_box", "parameter dimension must be at least 1"));
        }
        for (i, [lo, hi]) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::config(
                    format!("theta_box[{i}]"),
                    format!("invalid interval [{lo}, {hi}]"),
                ));
            }
        }
        Ok(ParameterBox { bounds })
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[[f64; 2]] {
        &self.bounds
    }

    pub fn lower(&self, i: usize) -> f64 {
        self.bounds[i][0]
    }

    pub fn upper(&self, i: usize) -> f64 {
        self.bounds[i][1]
    }

    pub fn width(&self, i: usize) -> f64 {
        self.bounds[i][1] - self.bounds[i][0]
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(&self.bounds)
                .all(|(t, [lo, hi])| *t >= *lo && *t <= *hi)
    }

    pub fn clamp(&self, theta: &mut [f64]) {
        for (t, [lo, hi]) in theta.iter_mut().zip(&self.bounds) {
            *t = t.clamp(*lo, *hi);
        }
    }
}

/// A point θ of the parameter box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    values: Vec<f64>,
    bounds: ParameterBox,
}

impl ParameterVector {
    pub fn new(values: Vec<f64>, bounds: ParameterBox) -> Result<Self> {
        if values.len() != bounds.dim() {
            return Err(Error::Domain(format!(
                "parameter has dimension {} but the box has dimension {}",
                values.len(),
                bounds.dim()
            )));
        }
        if !bounds.contains(&values) {
            return Err(Error::Domain(format!(
                "parameter {values:?} lies outside the box {:?}",
                bounds.bounds()
            )));
        }
        Ok(ParameterVector { values, bounds })
    }

    /// Build a parameter for `model`, using the model's declared box.
    pub fn for_model<M: HiddenMarkovModel + ?Sized>(model: &M, values: Vec<f64>) -> Result<Self> {
        if values.len() != model.param_dim() {
            return Err(Error::Domain(format!(
                "model `{}` has {} parameters, got {}",
                model.name(),
                model.param_dim(),
                values.len()
            )));
        }
        Self::new(values, model.parameter_box())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bounds(&self) -> &ParameterBox {
        &self.bounds
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Shape of the hidden state space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Finite(usize),
    Continuous(usize),
}

/// A parameterised hidden Markov model `{X_k, Y_k}`.
///
/// `X_0 ~ π₀`, `X_k ~ q_θ(X_{k−1}, ·)` and `Y_k ~ g_θ(· | X_k)` for
/// `k ≥ 1`. Sampling is mandatory; the density hooks default to "absent",
/// which is the intractable case.
pub trait HiddenMarkovModel: Send + Sync {
    type State: Clone + Send + Sync + std::fmt::Debug;

    fn name(&self) -> String;
    fn param_dim(&self) -> usize;
    fn obs_dim(&self) -> usize;
    fn state_kind(&self) -> StateKind;
    /// The compact parameter set Θ.
    fn parameter_box(&self) -> ParameterBox;

    fn sample_initial(&self, theta: &[f64], rng: &mut SimRng) -> Self::State;
    fn sample_transition(&self, theta: &[f64], prev: &Self::State, rng: &mut SimRng)
        -> Self::State;
    /// Draw `Y | X = state` into `out` (length `obs_dim`).
    fn sample_observation(
        &self,
        theta: &[f64],
        state: &Self::State,
        rng: &mut SimRng,
        out: &mut [f64],
    );

    /// Numeric coordinates of a hidden state, used when persisting trajectories.
    fn state_coords(&self, state: &Self::State) -> Vec<f64>;

    /// `g_θ(y | x)` with respect to Lebesgue measure, when tractable.
    fn obs_density(&self, _theta: &[f64], _state: &Self::State, _y: &[f64]) -> Option<f64> {
        None
    }

    /// `∇_θ g_θ(y | x)`. Defaults to central differences of [`obs_density`](Self::obs_density).
    fn obs_density_gradient(
        &self,
        theta: &[f64],
        state: &Self::State,
        y: &[f64],
    ) -> Option<Vec<f64>> {
        self.obs_density(theta, state, y)?;
        central_gradient(theta, |t| self.obs_density(t, state, y).unwrap_or(f64::NAN))
    }

    /// CDF of a scalar observation, `P_θ(Y ≤ y | X = x)`, when tractable.
    fn obs_cdf(&self, _theta: &[f64], _state: &Self::State, _y: f64) -> Option<f64> {
        None
    }

    /// `P_θ(lo < Y ≤ hi | X = x)` for scalar observations. Defaults to a CDF
    /// difference; override when a more accurate tail formula exists.
    fn obs_interval_probability(&self, theta: &[f64], state: &Self::State, lo: f64, hi: f64) -> Option<f64> {
        Some(self.obs_cdf(theta, state, hi)? - self.obs_cdf(theta, state, lo)?)
    }

    /// `∇_θ` of [`obs_cdf`](Self::obs_cdf). Defaults to central differences.
    fn obs_cdf_gradient(&self, theta: &[f64], state: &Self::State, y: f64) -> Option<Vec<f64>> {
        self.obs_cdf(theta, state, y)?;
        central_gradient(theta, |t| self.obs_cdf(t, state, y).unwrap_or(f64::NAN))
    }
}

/// A model whose hidden chain lives on `{0, …, K−1}`.
pub trait FiniteStateModel: HiddenMarkovModel<State = usize> {
    fn num_states(&self) -> usize;

    /// Row-stochastic `K × K` matrix `q_θ`.
    fn transition_matrix(&self, theta: &[f64]) -> DMatrix<f64>;

    /// Distribution of `X_0`.
    fn initial_distribution(&self, theta: &[f64]) -> DVector<f64>;

    /// `∂q_θ / ∂θ_j` for each coordinate `j`.
    fn transition_jacobian(&self, theta: &[f64]) -> Vec<DMatrix<f64>> {
        central_jacobian(theta, |t| self.transition_matrix(t))
    }

    /// `∂π₀ / ∂θ_j` for each coordinate `j`.
    fn initial_jacobian(&self, theta: &[f64]) -> Vec<DVector<f64>> {
        central_jacobian(theta, |t| self.initial_distribution(t))
    }
}

/// Stationary distribution of a row-stochastic matrix (left eigenvector for 1).
pub fn stationary_distribution(q: &DMatrix<f64>) -> DVector<f64> {
    let k = q.nrows();
    // Solve π(Q − I) = 0 with Σπ = 1 by replacing one equation.
    let mut a = q.transpose() - DMatrix::<f64>::identity(k, k);
    for j in 0..k {
        a[(k - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(k);
    b[k - 1] = 1.0;
    match a.lu().solve(&b) {
        Some(pi) => pi,
        None => DVector::from_element(k, 1.0 / k as f64),
    }
}

/// Check that every row of `q` is a probability vector within `tol`.
pub fn check_stochastic(q: &DMatrix<f64>, tol: f64) -> Result<()> {
    for (i, row) in q.row_iter().enumerate() {
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > tol || row.iter().any(|&p| !(0.0..=1.0 + tol).contains(&p)) {
            return Err(Error::config(
                format!("transition[{i}]"),
                format!("row is not a probability vector (sum {s})"),
            ));
        }
    }
    Ok(())
}

/// Draw an index from a probability vector.
pub fn sample_categorical<'a, I>(probs: I, rng: &mut SimRng) -> usize
where
    I: IntoIterator<Item = &'a f64>,
{
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.into_iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
        if *p > 0.0 {
            last = i;
        }
    }
    last
}

fn fd_step(t: f64) -> f64 {
    1e-6 * t.abs().max(1.0)
}

pub(crate) fn central_gradient<F: Fn(&[f64]) -> f64>(theta: &[f64], f: F) -> Option<Vec<f64>> {
    let mut t = theta.to_vec();
    let mut grad = Vec::with_capacity(theta.len());
    for j in 0..theta.len() {
        let h = fd_step(theta[j]);
        t[j] = theta[j] + h;
        let up = f(&t);
        t[j] = theta[j] - h;
        let down = f(&t);
        t[j] = theta[j];
        let g = (up - down) / (2.0 * h);
        if !g.is_finite() {
            return None;
        }
        grad.push(g);
    }
    Some(grad)
}

fn central_jacobian<T, F>(theta: &[f64], f: F) -> Vec<T>
where
    T: std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
    F: Fn(&[f64]) -> T,
{
    let mut t = theta.to_vec();
    (0..theta.len())
        .map(|j| {
            let h = fd_step(theta[j]);
            t[j] = theta[j] + h;
            let up = f(&t);
            t[j] = theta[j] - h;
            let down = f(&t);
            t[j] = theta[j];
            (up - down) * (1.0 / (2.0 * h))
        })
        .collect()
}

impl<M: HiddenMarkovModel + ?Sized> HiddenMarkovModel for &M {
    type State = M::State;

    fn name(&self) -> String {
        (**self).name()
    }
    fn param_dim(&self) -> usize {
        (**self).param_dim()
    }
    fn obs_dim(&self) -> usize {
        (**self).obs_dim()
    }
    fn state_kind(&self) -> StateKind {
        (**self).state_kind()
    }
    fn parameter_box(&self) -> ParameterBox {
        (**self).parameter_box()
    }
    fn sample_initial(&self, theta: &[f64], rng: &mut SimRng) -> Self::State {
        (**self).sample_initial(theta, rng)
    }
    fn sample_transition(&self, theta: &[f64], prev: &Self::State, rng: &mut SimRng) -> Self::State {
        (**self).sample_transition(theta, prev, rng)
    }
    fn sample_observation(&self, theta: &[f64], state: &Self::State, rng: &mut SimRng, out: &mut [f64]) {
        (**self).sample_observation(theta, state, rng, out)
    }
    fn state_coords(&self, state: &Self::State) -> Vec<f64> {
        (**self).state_coords(state)
    }
    fn obs_density(&self, theta: &[f64], state: &Self::State, y: &[f64]) -> Option<f64> {
        (**self).obs_density(theta, state, y)
    }
    fn obs_density_gradient(&self, theta: &[f64], state: &Self::State, y: &[f64]) -> Option<Vec<f64>> {
        (**self).obs_density_gradient(theta, state, y)
    }
    fn obs_cdf(&self, theta: &[f64], state: &Self::State, y: f64) -> Option<f64> {
        (**self).obs_cdf(theta, state, y)
    }
    fn obs_interval_probability(&self, theta: &[f64], state: &Self::State, lo: f64, hi: f64) -> Option<f64> {
        (**self).obs_interval_probability(theta, state, lo, hi)
    }
    fn obs_cdf_gradient(&self, theta: &[f64], state: &Self::State, y: f64) -> Option<Vec<f64>> {
        (**self).obs_cdf_gradient(theta, state, y)
    }
}

impl<M: FiniteStateModel + ?Sized> FiniteStateModel for &M {
    fn num_states(&self) -> usize {
        (**self).num_states()
    }
    fn transition_matrix(&self, theta: &[f64]) -> DMatrix<f64> {
        (**self).transition_matrix(theta)
    }
    fn initial_distribution(&self, theta: &[f64]) -> DVector<f64> {
        (**self).initial_distribution(theta)
    }
    fn transition_jacobian(&self, theta: &[f64]) -> Vec<DMatrix<f64>> {
        (**self).transition_jacobian(theta)
    }
    fn initial_jacobian(&self, theta: &[f64]) -> Vec<DVector<f64>> {
        (**self).initial_jacobian(theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_rejects_bad_intervals() {
        assert!(ParameterBox::new(vec![]).is_err());
        assert!(ParameterBox::new(vec![[1.0, 0.0]]).is_err());
        assert!(ParameterBox::new(vec![[0.0, f64::INFINITY]]).is_err());
    }

    #[test]
    fn parameter_vector_must_lie_in_box() {
        let b = ParameterBox::new(vec![[0.0, 1.0], [-1.0, 1.0]]).unwrap();
        assert!(ParameterVector::new(vec![0.5, 0.0], b.clone()).is_ok());
        assert!(ParameterVector::new(vec![1.5, 0.0], b.clone()).is_err());
        assert!(ParameterVector::new(vec![0.5], b).is_err());
    }

    #[test]
    fn stationary_of_two_state_chain() {
        let q = DMatrix::from_row_slice(2, 2, &[0.95, 0.05, 0.2, 0.8]);
        let pi = stationary_distribution(&q);
        assert!((pi[0] - 0.8).abs() < 1e-12);
        assert!((pi[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn stochastic_check() {
        let good = DMatrix::from_row_slice(2, 2, &[0.3, 0.7, 1.0, 0.0]);
        assert!(check_stochastic(&good, 1e-12).is_ok());
        let bad = DMatrix::from_row_slice(2, 2, &[0.3, 0.6, 1.0, 0.0]);
        assert!(check_stochastic(&bad, 1e-12).is_err());
    }
}
