//! Built-in models and their JSON configuration.

use super::{
    central_gradient, check_stochastic, sample_categorical, stationary_distribution,
    FiniteStateModel, HiddenMarkovModel, ParameterBox, StateKind,
};
use crate::error::{Error, Result};
use crate::numeric::{normal_cdf, normal_interval, normal_pdf, normal_quantile};
use crate::rng::SimRng;
use crate::sampling::alpha_stable;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// How θ enters the Gaussian emission `N(μ_x, s²)` of [`FiniteGaussian`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaussianParameterization {
    /// θ = (a): `μ_x = a·c_x`, `s` fixed.
    #[default]
    MeanScale,
    /// θ = (δ): `μ_x = c_x + δ`, `s` fixed.
    Location,
    /// θ = (s): `μ_x = c_x`, emission standard deviation `s`.
    Sd,
    /// θ = (σ, δ): `μ_x = c_x + δ`, emission standard deviation `σ`.
    LocationScale,
}

impl GaussianParameterization {
    fn dim(self) -> usize {
        match self {
            GaussianParameterization::LocationScale => 2,
            _ => 1,
        }
    }

    fn default_box(self) -> Vec<[f64; 2]> {
        match self {
            GaussianParameterization::MeanScale => vec![[0.0, 3.0]],
            GaussianParameterization::Location => vec![[-3.0, 3.0]],
            GaussianParameterization::Sd => vec![[0.2, 5.0]],
            GaussianParameterization::LocationScale => vec![[0.2, 5.0], [-3.0, 3.0]],
        }
    }
}

/// Hyper-parameters of `finite_gaussian`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteGaussianHyper {
    /// Number of hidden states (default 2, or inferred from `transition`/`centers`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Full transition matrix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<Vec<Vec<f64>>>,
    /// Two-state shorthand: `P(0 → 1)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p01: Option<f64>,
    /// Two-state shorthand: `P(1 → 0)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p10: Option<f64>,
    /// State offsets `c_x` (default evenly spaced on [−1, 1]).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centers: Option<Vec<f64>>,
    /// Emission standard deviation when it is not a parameter (default 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sd: Option<f64>,
    #[serde(default)]
    pub parameterization: GaussianParameterization,
    /// Truncate emissions to `[lo, hi]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<[f64; 2]>,
    /// Distribution of `X_0` (default: stationary).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
}

/// `K`-state chain with Gaussian (optionally truncated) emissions. Fully tractable.
#[derive(Debug, Clone)]
pub struct FiniteGaussian {
    transition: DMatrix<f64>,
    initial: DVector<f64>,
    centers: Vec<f64>,
    sd: f64,
    parameterization: GaussianParameterization,
    support: Option<[f64; 2]>,
    bounds: ParameterBox,
}

impl FiniteGaussian {
    pub fn new(hyper: &FiniteGaussianHyper) -> Result<Self> {
        let k = hyper
            .k
            .or_else(|| hyper.transition.as_ref().map(Vec::len))
            .or_else(|| hyper.centers.as_ref().map(Vec::len))
            .unwrap_or(2);
        if k == 0 {
            return Err(Error::config("hyper.k", "need at least one hidden state"));
        }
        let transition = match (&hyper.transition, hyper.p01, hyper.p10) {
            (Some(rows), _, _) => {
                if rows.len() != k || rows.iter().any(|r| r.len() != k) {
                    return Err(Error::config("hyper.transition", format!("must be {k}×{k}")));
                }
                DMatrix::from_row_iterator(k, k, rows.iter().flatten().copied())
            }
            (None, p01, p10) if k == 2 => {
                let a = p01.unwrap_or(0.3);
                let b = p10.unwrap_or(0.3);
                DMatrix::from_row_slice(2, 2, &[1.0 - a, a, b, 1.0 - b])
            }
            (None, None, None) => {
                if k == 1 {
                    DMatrix::from_element(1, 1, 1.0)
                } else {
                    let off = 0.3 / (k - 1) as f64;
                    DMatrix::from_fn(k, k, |i, j| if i == j { 0.7 } else { off })
                }
            }
            _ => {
                return Err(Error::config("hyper.p01", "p01/p10 shorthand requires k = 2"));
            }
        };
        check_stochastic(&transition, 1e-12).map_err(|e| match e {
            Error::Config { key, message } => Error::config(format!("hyper.{key}"), message),
            other => other,
        })?;
        let centers = match &hyper.centers {
            Some(c) if c.len() == k => c.clone(),
            Some(_) => return Err(Error::config("hyper.centers", format!("expected {k} values"))),
            None if k == 1 => vec![0.0],
            None => (0..k).map(|i| -1.0 + 2.0 * i as f64 / (k - 1) as f64).collect(),
        };
        let sd = hyper.sd.unwrap_or(1.0);
        if !(sd > 0.0 && sd.is_finite()) {
            return Err(Error::config("hyper.sd", "must be positive"));
        }
        if let Some([lo, hi]) = hyper.support {
            if !(lo < hi) {
                return Err(Error::config("hyper.support", "need lo < hi"));
            }
        }
        let initial = match &hyper.initial {
            Some(p) => {
                let s: f64 = p.iter().sum();
                if p.len() != k || (s - 1.0).abs() > 1e-12 || p.iter().any(|&v| v < 0.0) {
                    return Err(Error::config("hyper.initial", "must be a probability vector of length k"));
                }
                DVector::from_column_slice(p)
            }
            None => stationary_distribution(&transition),
        };
        Ok(FiniteGaussian {
            transition,
            initial,
            centers,
            sd,
            parameterization: hyper.parameterization,
            support: hyper.support,
            bounds: ParameterBox::new(hyper.parameterization.default_box())?,
        })
    }

    pub fn with_box(mut self, bounds: ParameterBox) -> Result<Self> {
        if bounds.dim() != self.parameterization.dim() {
            return Err(Error::config("theta_box", format!("expected {} intervals", self.parameterization.dim())));
        }
        self.bounds = bounds;
        Ok(self)
    }

    pub fn parameterization(&self) -> GaussianParameterization {
        self.parameterization
    }

    pub fn support(&self) -> Option<[f64; 2]> {
        self.support
    }

    /// Emission mean and standard deviation in state `x`.
    pub fn emission(&self, theta: &[f64], x: usize) -> (f64, f64) {
        let c = self.centers[x];
        match self.parameterization {
            GaussianParameterization::MeanScale => (theta[0] * c, self.sd),
            GaussianParameterization::Location => (c + theta[0], self.sd),
            GaussianParameterization::Sd => (c, theta[0]),
            GaussianParameterization::LocationScale => (c + theta[1], theta[0]),
        }
    }

    /// `(∂μ/∂θ_j, ∂s/∂θ_j)` for each coordinate.
    fn emission_jacobian(&self, x: usize) -> Vec<(f64, f64)> {
        let c = self.centers[x];
        match self.parameterization {
            GaussianParameterization::MeanScale => vec![(c, 0.0)],
            GaussianParameterization::Location => vec![(1.0, 0.0)],
            GaussianParameterization::Sd => vec![(0.0, 1.0)],
            GaussianParameterization::LocationScale => vec![(0.0, 1.0), (1.0, 0.0)],
        }
    }

    /// Probability mass of the truncation window (1 when untruncated).
    fn truncation_mass(&self, mu: f64, s: f64) -> f64 {
        match self.support {
            None => 1.0,
            Some([a, b]) => normal_interval((a - mu) / s, (b - mu) / s),
        }
    }
}

impl HiddenMarkovModel for FiniteGaussian {
    type State = usize;

    fn name(&self) -> String {
        "finite_gaussian".into()
    }
    fn param_dim(&self) -> usize {
        self.parameterization.dim()
    }
    fn obs_dim(&self) -> usize {
        1
    }
    fn state_kind(&self) -> StateKind {
        StateKind::Finite(self.centers.len())
    }
    fn parameter_box(&self) -> ParameterBox {
        self.bounds.clone()
    }
    fn sample_initial(&self, _theta: &[f64], rng: &mut SimRng) -> usize {
        sample_categorical(self.initial.iter(), rng)
    }
    fn sample_transition(&self, _theta: &[f64], prev: &usize, rng: &mut SimRng) -> usize {
        sample_categorical(self.transition.row(*prev).iter(), rng)
    }
    fn sample_observation(&self, theta: &[f64], state: &usize, rng: &mut SimRng, out: &mut [f64]) {
        let (mu, s) = self.emission(theta, *state);
        out[0] = match self.support {
            None => mu + s * rng.sample::<f64, _>(StandardNormal),
            Some([a, b]) => {
                let (pa, pb) = (normal_cdf((a - mu) / s), normal_cdf((b - mu) / s));
                let u: f64 = rng.random();
                (mu + s * normal_quantile(pa + u * (pb - pa))).clamp(a, b)
            }
        };
    }
    fn state_coords(&self, state: &usize) -> Vec<f64> {
        vec![*state as f64]
    }

    fn obs_density(&self, theta: &[f64], state: &usize, y: &[f64]) -> Option<f64> {
        let (mu, s) = self.emission(theta, *state);
        if let Some([a, b]) = self.support {
            if y[0] < a || y[0] > b {
                return Some(0.0);
            }
        }
        Some(normal_pdf((y[0] - mu) / s) / s / self.truncation_mass(mu, s))
    }

    fn obs_density_gradient(&self, theta: &[f64], state: &usize, y: &[f64]) -> Option<Vec<f64>> {
        if self.support.is_some() {
            return central_gradient(theta, |t| self.obs_density(t, state, y).unwrap_or(f64::NAN));
        }
        let (mu, s) = self.emission(theta, *state);
        let z = (y[0] - mu) / s;
        let g = normal_pdf(z) / s;
        Some(
            self.emission_jacobian(*state)
                .into_iter()
                .map(|(dmu, ds)| g * (z / s * dmu + (z * z - 1.0) / s * ds))
                .collect(),
        )
    }

    fn obs_cdf(&self, theta: &[f64], state: &usize, y: f64) -> Option<f64> {
        let (mu, s) = self.emission(theta, *state);
        match self.support {
            None => Some(normal_cdf((y - mu) / s)),
            Some([a, b]) => {
                let yc = y.clamp(a, b);
                Some(normal_interval((a - mu) / s, (yc - mu) / s) / self.truncation_mass(mu, s))
            }
        }
    }

    fn obs_interval_probability(&self, theta: &[f64], state: &usize, lo: f64, hi: f64) -> Option<f64> {
        let (mu, s) = self.emission(theta, *state);
        match self.support {
            None => Some(normal_interval((lo - mu) / s, (hi - mu) / s)),
            Some([a, b]) => {
                let (l, h) = (lo.max(a), hi.min(b));
                if l >= h {
                    return Some(0.0);
                }
                Some(normal_interval((l - mu) / s, (h - mu) / s) / self.truncation_mass(mu, s))
            }
        }
    }

    fn obs_cdf_gradient(&self, theta: &[f64], state: &usize, y: f64) -> Option<Vec<f64>> {
        if self.support.is_some() {
            return central_gradient(theta, |t| self.obs_cdf(t, state, y).unwrap_or(f64::NAN));
        }
        let (mu, s) = self.emission(theta, *state);
        let z = (y - mu) / s;
        let p = normal_pdf(z);
        Some(
            self.emission_jacobian(*state)
                .into_iter()
                .map(|(dmu, ds)| -p / s * (dmu + z * ds))
                .collect(),
        )
    }
}

impl FiniteStateModel for FiniteGaussian {
    fn num_states(&self) -> usize {
        self.centers.len()
    }
    fn transition_matrix(&self, _theta: &[f64]) -> DMatrix<f64> {
        self.transition.clone()
    }
    fn initial_distribution(&self, _theta: &[f64]) -> DVector<f64> {
        self.initial.clone()
    }
    fn transition_jacobian(&self, theta: &[f64]) -> Vec<DMatrix<f64>> {
        let k = self.num_states();
        vec![DMatrix::zeros(k, k); theta.len()]
    }
    fn initial_jacobian(&self, theta: &[f64]) -> Vec<DVector<f64>> {
        vec![DVector::zeros(self.num_states()); theta.len()]
    }
}

/// Hyper-parameters of `two_state_alpha_stable`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaStableHyper {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_alpha() -> f64 {
    1.8
}

/// Hidden chain on {−1, +1} (indices 0, 1) with transition matrix
/// `[[19/20, 1/20], [1/5, 4/5]]`; `Y | X ~ S_α(σ, 0, X + δ)`, θ = (σ, δ).
/// The observation density is treated as intractable.
#[derive(Debug, Clone)]
pub struct TwoStateAlphaStable {
    alpha: f64,
    transition: DMatrix<f64>,
    bounds: ParameterBox,
}

impl TwoStateAlphaStable {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::config("hyper.alpha", format!("must lie in (0, 2], got {alpha}")));
        }
        Ok(TwoStateAlphaStable {
            alpha,
            transition: DMatrix::from_row_slice(2, 2, &[19.0 / 20.0, 1.0 / 20.0, 1.0 / 5.0, 4.0 / 5.0]),
            bounds: ParameterBox::new(vec![[0.2, 5.0], [-3.0, 3.0]])?,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Hidden value (−1 or +1) of a state index.
    pub fn state_value(state: usize) -> f64 {
        if state == 0 {
            -1.0
        } else {
            1.0
        }
    }
}

impl HiddenMarkovModel for TwoStateAlphaStable {
    type State = usize;

    fn name(&self) -> String {
        "two_state_alpha_stable".into()
    }
    fn param_dim(&self) -> usize {
        2
    }
    fn obs_dim(&self) -> usize {
        1
    }
    fn state_kind(&self) -> StateKind {
        StateKind::Finite(2)
    }
    fn parameter_box(&self) -> ParameterBox {
        self.bounds.clone()
    }
    fn sample_initial(&self, theta: &[f64], rng: &mut SimRng) -> usize {
        sample_categorical(self.initial_distribution(theta).iter(), rng)
    }
    fn sample_transition(&self, _theta: &[f64], prev: &usize, rng: &mut SimRng) -> usize {
        sample_categorical(self.transition.row(*prev).iter(), rng)
    }
    fn sample_observation(&self, theta: &[f64], state: &usize, rng: &mut SimRng, out: &mut [f64]) {
        let loc = Self::state_value(*state) + theta[1];
        out[0] = alpha_stable(self.alpha, 0.0, theta[0], loc, rng)
            .expect("alpha validated at construction and sigma bounded away from 0 by the box");
    }
    fn state_coords(&self, state: &usize) -> Vec<f64> {
        vec![Self::state_value(*state)]
    }
}

impl FiniteStateModel for TwoStateAlphaStable {
    fn num_states(&self) -> usize {
        2
    }
    fn transition_matrix(&self, _theta: &[f64]) -> DMatrix<f64> {
        self.transition.clone()
    }
    fn initial_distribution(&self, _theta: &[f64]) -> DVector<f64> {
        stationary_distribution(&self.transition)
    }
}

/// Directly observed i.i.d. `X = ±θ` with probability ½ each.
///
/// The observation law is discrete, so no Lebesgue density is exposed; exact
/// ABC probabilities come from the closed form in the oracle module.
#[derive(Debug, Clone)]
pub struct IidPmTheta {
    bounds: ParameterBox,
}

impl IidPmTheta {
    pub fn new() -> Self {
        IidPmTheta {
            bounds: ParameterBox::new(vec![[0.0, 3.0]]).expect("static box"),
        }
    }
}

impl Default for IidPmTheta {
    fn default() -> Self {
        Self::new()
    }
}

impl HiddenMarkovModel for IidPmTheta {
    type State = usize;

    fn name(&self) -> String {
        "iid_pm_theta".into()
    }
    fn param_dim(&self) -> usize {
        1
    }
    fn obs_dim(&self) -> usize {
        1
    }
    fn state_kind(&self) -> StateKind {
        StateKind::Finite(2)
    }
    fn parameter_box(&self) -> ParameterBox {
        self.bounds.clone()
    }
    fn sample_initial(&self, _theta: &[f64], rng: &mut SimRng) -> usize {
        usize::from(rng.random::<bool>())
    }
    fn sample_transition(&self, _theta: &[f64], _prev: &usize, rng: &mut SimRng) -> usize {
        usize::from(rng.random::<bool>())
    }
    fn sample_observation(&self, theta: &[f64], state: &usize, _rng: &mut SimRng, out: &mut [f64]) {
        out[0] = if *state == 0 { theta[0] } else { -theta[0] };
    }
    fn state_coords(&self, state: &usize) -> Vec<f64> {
        vec![*state as f64]
    }
}

impl FiniteStateModel for IidPmTheta {
    fn num_states(&self) -> usize {
        2
    }
    fn transition_matrix(&self, _theta: &[f64]) -> DMatrix<f64> {
        DMatrix::from_element(2, 2, 0.5)
    }
    fn initial_distribution(&self, _theta: &[f64]) -> DVector<f64> {
        DVector::from_element(2, 0.5)
    }
}

/// JSON model definition: `{"model": name, "hyper": {...}, "theta_box": [[lo, hi], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub model: String,
    #[serde(default = "empty_object")]
    pub hyper: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_box: Option<Vec<[f64; 2]>>,
}

fn empty_object() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

impl ModelConfig {
    pub fn named(model: &str) -> Self {
        ModelConfig {
            model: model.into(),
            hyper: empty_object(),
            theta_box: None,
        }
    }

    pub fn with_hyper(mut self, hyper: serde_json::Value) -> Self {
        self.hyper = hyper;
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config("model", e.to_string()))
    }

    pub fn build(&self) -> Result<BuiltinModel> {
        let model = BuiltinModel::from_name(&self.model, &self.hyper)?;
        match &self.theta_box {
            Some(b) => model.with_box(ParameterBox::new(b.clone())?),
            None => Ok(model),
        }
    }
}

/// Any of the built-in models, dispatched at run time.
#[derive(Debug, Clone)]
pub enum BuiltinModel {
    TwoStateAlphaStable(TwoStateAlphaStable),
    FiniteGaussian(FiniteGaussian),
    IidPmTheta(IidPmTheta),
}

fn hyper_error(e: serde_json::Error) -> Error {
    let msg = e.to_string();
    // serde names unknown fields as "unknown field `x`"; surface x as the key
    let key = msg
        .split('`')
        .nth(1)
        .map(|k| format!("hyper.{k}"))
        .unwrap_or_else(|| "hyper".into());
    Error::config(key, msg)
}

impl BuiltinModel {
    pub const NAMES: [&'static str; 3] = ["two_state_alpha_stable", "finite_gaussian", "iid_pm_theta"];

    /// Construct a built-in model by name from a JSON hyper-parameter object.
    pub fn from_name(name: &str, hyper: &serde_json::Value) -> Result<Self> {
        let hyper = if hyper.is_null() { empty_object() } else { hyper.clone() };
        match name {
            "two_state_alpha_stable" => {
                let h: AlphaStableHyper = serde_json::from_value(hyper).map_err(hyper_error)?;
                Ok(BuiltinModel::TwoStateAlphaStable(TwoStateAlphaStable::new(h.alpha)?))
            }
            "finite_gaussian" => {
                let h: FiniteGaussianHyper = serde_json::from_value(hyper).map_err(hyper_error)?;
                Ok(BuiltinModel::FiniteGaussian(FiniteGaussian::new(&h)?))
            }
            "iid_pm_theta" => {
                if hyper.as_object().is_some_and(|o| !o.is_empty()) {
                    let key = hyper.as_object().and_then(|o| o.keys().next().cloned()).unwrap_or_default();
                    return Err(Error::config(format!("hyper.{key}"), "iid_pm_theta takes no hyper-parameters"));
                }
                Ok(BuiltinModel::IidPmTheta(IidPmTheta::new()))
            }
            other => Err(Error::config(
                "model",
                format!("unknown model `{other}` (expected one of {:?})", Self::NAMES),
            )),
        }
    }

    pub fn with_box(self, bounds: ParameterBox) -> Result<Self> {
        if bounds.dim() != self.param_dim() {
            return Err(Error::config("theta_box", format!("expected {} intervals", self.param_dim())));
        }
        Ok(match self {
            BuiltinModel::TwoStateAlphaStable(mut m) => {
                m.bounds = bounds;
                BuiltinModel::TwoStateAlphaStable(m)
            }
            BuiltinModel::FiniteGaussian(m) => BuiltinModel::FiniteGaussian(m.with_box(bounds)?),
            BuiltinModel::IidPmTheta(mut m) => {
                m.bounds = bounds;
                BuiltinModel::IidPmTheta(m)
            }
        })
    }
}

macro_rules! dispatch {
    ($self:ident, $m:ident => $body:expr) => {
        match $self {
            BuiltinModel::TwoStateAlphaStable($m) => $body,
            BuiltinModel::FiniteGaussian($m) => $body,
            BuiltinModel::IidPmTheta($m) => $body,
        }
    };
}

impl HiddenMarkovModel for BuiltinModel {
    type State = usize;

    fn name(&self) -> String {
        dispatch!(self, m => m.name())
    }
    fn param_dim(&self) -> usize {
        dispatch!(self, m => m.param_dim())
    }
    fn obs_dim(&self) -> usize {
        dispatch!(self, m => m.obs_dim())
    }
    fn state_kind(&self) -> StateKind {
        dispatch!(self, m => m.state_kind())
    }
    fn parameter_box(&self) -> ParameterBox {
        dispatch!(self, m => m.parameter_box())
    }
    fn sample_initial(&self, theta: &[f64], rng: &mut SimRng) -> usize {
        dispatch!(self, m => m.sample_initial(theta, rng))
    }
    fn sample_transition(&self, theta: &[f64], prev: &usize, rng: &mut SimRng) -> usize {
        dispatch!(self, m => m.sample_transition(theta, prev, rng))
    }
    fn sample_observation(&self, theta: &[f64], state: &usize, rng: &mut SimRng, out: &mut [f64]) {
        dispatch!(self, m => m.sample_observation(theta, state, rng, out))
    }
    fn state_coords(&self, state: &usize) -> Vec<f64> {
        dispatch!(self, m => m.state_coords(state))
    }
    fn obs_density(&self, theta: &[f64], state: &usize, y: &[f64]) -> Option<f64> {
        dispatch!(self, m => m.obs_density(theta, state, y))
    }
    fn obs_density_gradient(&self, theta: &[f64], state: &usize, y: &[f64]) -> Option<Vec<f64>> {
        dispatch!(self, m => m.obs_density_gradient(theta, state, y))
    }
    fn obs_cdf(&self, theta: &[f64], state: &usize, y: f64) -> Option<f64> {
        dispatch!(self, m => m.obs_cdf(theta, state, y))
    }
    fn obs_interval_probability(&self, theta: &[f64], state: &usize, lo: f64, hi: f64) -> Option<f64> {
        dispatch!(self, m => m.obs_interval_probability(theta, state, lo, hi))
    }
    fn obs_cdf_gradient(&self, theta: &[f64], state: &usize, y: f64) -> Option<Vec<f64>> {
        dispatch!(self, m => m.obs_cdf_gradient(theta, state, y))
    }
}

impl FiniteStateModel for BuiltinModel {
    fn num_states(&self) -> usize {
        dispatch!(self, m => m.num_states())
    }
    fn transition_matrix(&self, theta: &[f64]) -> DMatrix<f64> {
        dispatch!(self, m => m.transition_matrix(theta))
    }
    fn initial_distribution(&self, theta: &[f64]) -> DVector<f64> {
        dispatch!(self, m => m.initial_distribution(theta))
    }
    fn transition_jacobian(&self, theta: &[f64]) -> Vec<DMatrix<f64>> {
        dispatch!(self, m => m.transition_jacobian(theta))
    }
    fn initial_jacobian(&self, theta: &[f64]) -> Vec<DVector<f64>> {
        dispatch!(self, m => m.initial_jacobian(theta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn alpha_stable_transition_row() {
        let m = BuiltinModel::from_name("two_state_alpha_stable", &json!({"alpha": 1.8})).unwrap();
        let q = m.transition_matrix(&[1.0, 0.0]);
        assert_eq!(q[(0, 0)], 0.95);
        assert_eq!(q[(0, 1)], 0.05);
        assert!(check_stochastic(&q, 1e-12).is_ok());
    }

    #[test]
    fn symmetric_gaussian_chain_is_balanced() {
        let m = BuiltinModel::from_name("finite_gaussian", &json!({"p01": 0.3, "p10": 0.3})).unwrap();
        let pi = m.initial_distribution(&[1.0]);
        assert!((pi[0] - 0.5).abs() < 1e-12 && (pi[1] - 0.5).abs() < 1e-12);
        assert_eq!(m.emission_of(&[1.0]), vec![(-1.0, 1.0), (1.0, 1.0)]);
    }

    #[test]
    fn iid_zero_theta_observes_zero() {
        let m = IidPmTheta::new();
        let mut rng = crate::rng::StreamKey::new(1, crate::rng::Purpose::Test).rng();
        let mut y = [1.0];
        for s in 0..2 {
            m.sample_observation(&[0.0], &s, &mut rng, &mut y);
            assert_eq!(y[0], 0.0);
        }
    }

    #[test]
    fn unknown_names_and_keys_are_config_errors() {
        let e = BuiltinModel::from_name("nope", &json!({})).unwrap_err();
        assert!(matches!(e, Error::Config { ref key, .. } if key == "model"));
        let e = BuiltinModel::from_name("finite_gaussian", &json!({"bogus": 1})).unwrap_err();
        assert!(matches!(e, Error::Config { ref key, .. } if key == "hyper.bogus"), "{e}");
        let e = BuiltinModel::from_name("two_state_alpha_stable", &json!({"alpha": 2.5})).unwrap_err();
        assert!(matches!(e, Error::Config { ref key, .. } if key == "hyper.alpha"));
        let e = BuiltinModel::from_name("finite_gaussian", &json!({"transition": [[0.5, 0.6], [0.5, 0.5]]}))
            .unwrap_err();
        assert!(matches!(e, Error::Config { ref key, .. } if key.starts_with("hyper.transition")), "{e}");
    }

    #[test]
    fn config_round_trip_with_box() {
        let cfg = ModelConfig::from_json(
            r#"{"model": "finite_gaussian", "hyper": {"parameterization": "location_scale"}, "theta_box": [[0.5, 2.0], [-1.0, 1.0]]}"#,
        )
        .unwrap();
        let m = cfg.build().unwrap();
        assert_eq!(m.param_dim(), 2);
        assert_eq!(m.parameter_box().bounds(), &[[0.5, 2.0], [-1.0, 1.0]]);
        let bad = ModelConfig::from_json(r#"{"model": "iid_pm_theta", "theta_box": [[0, 1], [0, 1]]}"#).unwrap();
        assert!(bad.build().is_err());
    }

    #[test]
    fn gaussian_gradients_match_finite_differences() {
        let m = FiniteGaussian::new(&FiniteGaussianHyper {
            parameterization: GaussianParameterization::LocationScale,
            ..Default::default()
        })
        .unwrap();
        let theta = [1.3, -0.4];
        for x in 0..2 {
            for &y in &[-2.0, 0.1, 1.7] {
                let a = m.obs_density_gradient(&theta, &x, &[y]).unwrap();
                let b = central_gradient(&theta, |t| m.obs_density(t, &x, &[y]).unwrap()).unwrap();
                let c = m.obs_cdf_gradient(&theta, &x, y).unwrap();
                let d = central_gradient(&theta, |t| m.obs_cdf(t, &x, y).unwrap()).unwrap();
                for j in 0..2 {
                    assert!((a[j] - b[j]).abs() < 1e-7);
                    assert!((c[j] - d[j]).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn truncated_emission_is_a_density() {
        let m = FiniteGaussian::new(&FiniteGaussianHyper {
            centers: Some(vec![-0.5, 0.5]),
            support: Some([-1.0, 1.0]),
            ..Default::default()
        })
        .unwrap();
        for x in 0..2 {
            let total = crate::numeric::simpson(|y| m.obs_density(&[1.0], &x, &[y]).unwrap(), -1.0, 1.0, 400);
            assert!((total - 1.0).abs() < 1e-10);
            assert_eq!(m.obs_density(&[1.0], &x, &[1.5]).unwrap(), 0.0);
            assert!((m.obs_cdf(&[1.0], &x, 1.0).unwrap() - 1.0).abs() < 1e-14);
        }
        let mut rng = crate::rng::StreamKey::new(3, crate::rng::Purpose::Test).rng();
        let mut y = [0.0];
        for _ in 0..1000 {
            m.sample_observation(&[1.0], &1, &mut rng, &mut y);
            assert!((-1.0..=1.0).contains(&y[0]));
        }
    }
}

#[cfg(test)]
impl BuiltinModel {
    fn emission_of(&self, theta: &[f64]) -> Vec<(f64, f64)> {
        match self {
            BuiltinModel::FiniteGaussian(m) => (0..m.num_states()).map(|x| m.emission(theta, x)).collect(),
            _ => vec![],
        }
    }
}
