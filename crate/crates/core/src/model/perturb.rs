//! ε-perturbation of a model: the law of `{X_k, Y_k + εZ_k}`.
//!
//! With `Z` uniform on the unit ball the perturbed observation density is the
//! ball average `g^ε(y|x) = ν(B^ε_y)^{-1} ∫_{B^ε_y} g(u|x) du`, which is what
//! makes the ABC likelihood of the data proportional (with a θ-free constant)
//! to the exact likelihood of the perturbed model. With a smooth kernel `φ` the
//! perturbed density is the convolution `∫ g(y − εz|x) φ(z) dz`.

use super::{FiniteStateModel, HiddenMarkovModel, ParameterBox, StateKind};
use crate::error::{Error, Result};
use crate::numeric::{euclidean_ball_volume, simpson};
use crate::rng::SimRng;
use crate::sampling::ball_uniform;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// Norm defining the ball `B^ε_y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BallNorm {
    L2,
    #[default]
    Linf,
}

impl BallNorm {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match self {
            BallNorm::Linf => diffs.fold(0.0, f64::max),
            BallNorm::L2 => diffs.map(|d| d * d).sum::<f64>().sqrt(),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linf" | "l_inf" | "max" => Ok(BallNorm::Linf),
            "l2" | "euclidean" => Ok(BallNorm::L2),
            other => Err(Error::config("norm", format!("unknown norm `{other}`"))),
        }
    }
}

/// Lebesgue volume of `B^ε` in `m` dimensions.
pub fn ball_volume(norm: BallNorm, m: usize, epsilon: f64) -> f64 {
    match norm {
        BallNorm::Linf => (2.0 * epsilon).powi(m as i32),
        BallNorm::L2 => euclidean_ball_volume(m, epsilon),
    }
}

type LogDensity1d = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type Sampler1d = Arc<dyn Fn(&mut SimRng) -> f64 + Send + Sync>;

/// A smooth, everywhere-positive product kernel `φ(u) = Π φ₁(u_i)`.
#[derive(Clone)]
pub struct SmoothKernel {
    name: String,
    log_density: LogDensity1d,
    sampler: Option<Sampler1d>,
    sup: f64,
    half_width: f64,
}

impl fmt::Debug for SmoothKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothKernel")
            .field("name", &self.name)
            .field("has_sampler", &self.sampler.is_some())
            .field("sup", &self.sup)
            .finish()
    }
}

impl PartialEq for SmoothKernel {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

impl SmoothKernel {
    /// Standard normal kernel.
    pub fn gaussian() -> Self {
        SmoothKernel {
            name: "gaussian".into(),
            log_density: Arc::new(|u| -0.5 * u * u - 0.918_938_533_204_672_8),
            sampler: Some(Arc::new(|rng| rng.sample(StandardNormal))),
            sup: 0.398_942_280_401_432_7,
            half_width: 12.0,
        }
    }

    /// Standard logistic kernel, `φ(u) = e^{-u} / (1 + e^{-u})²`.
    pub fn logistic() -> Self {
        SmoothKernel {
            name: "logistic".into(),
            log_density: Arc::new(|u: f64| {
                let a = -u.abs();
                a - 2.0 * a.exp().ln_1p()
            }),
            sampler: Some(Arc::new(|rng| {
                let p: f64 = rng.random_range(f64::EPSILON..1.0);
                (p / (1.0 - p)).ln()
            })),
            sup: 0.25,
            half_width: 45.0,
        }
    }

    /// A user-supplied kernel. Positivity and the finite second moment are
    /// declared by the caller; `sup` is the supremum of the 1-D density and
    /// `half_width` the range `[-w, w]` holding essentially all of its mass.
    pub fn custom(
        name: impl Into<String>,
        log_density: impl Fn(f64) -> f64 + Send + Sync + 'static,
        sampler: Option<Sampler1d>,
        sup: f64,
        half_width: f64,
        positive_everywhere: bool,
        finite_second_moment: bool,
    ) -> Result<Self> {
        if !positive_everywhere {
            return Err(Error::config("kernel", "smooth kernels must be positive everywhere"));
        }
        if !finite_second_moment {
            return Err(Error::config("kernel", "smooth kernels must have a finite second moment"));
        }
        if !(sup > 0.0 && sup.is_finite() && half_width > 0.0) {
            return Err(Error::config("kernel", "sup and half_width must be positive and finite"));
        }
        Ok(SmoothKernel {
            name: name.into(),
            log_density: Arc::new(log_density),
            sampler,
            sup,
            half_width,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn has_sampler(&self) -> bool {
        self.sampler.is_some()
    }

    pub fn log_density_1d(&self, u: f64) -> f64 {
        (self.log_density)(u)
    }

    pub fn log_density(&self, u: &[f64]) -> f64 {
        u.iter().map(|&v| (self.log_density)(v)).sum()
    }

    /// `sup φ` in `m` dimensions.
    pub fn sup(&self, m: usize) -> f64 {
        self.sup.powi(m as i32)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    fn sample_into(&self, rng: &mut SimRng, out: &mut [f64]) {
        let sampler = self
            .sampler
            .as_ref()
            .expect("kernel sampler presence is checked when the perturbation is built");
        for v in out {
            *v = sampler(rng);
        }
    }
}

/// Noise law of `Z`.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    /// `Z` uniform on the unit ball: indicator ABC.
    UniformBall,
    /// `Z ~ Φ` with smooth density `φ`: smoothed ABC.
    Smooth(SmoothKernel),
}

impl Kernel {
    pub fn name(&self) -> &str {
        match self {
            Kernel::UniformBall => "uniform",
            Kernel::Smooth(k) => k.name(),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" | "uniform_ball" | "indicator" => Ok(Kernel::UniformBall),
            "gaussian" | "normal" => Ok(Kernel::Smooth(SmoothKernel::gaussian())),
            "logistic" => Ok(Kernel::Smooth(SmoothKernel::logistic())),
            other => Err(Error::config("kernel", format!("unknown kernel `{other}`"))),
        }
    }

    pub fn is_smooth(&self) -> bool {
        matches!(self, Kernel::Smooth(_))
    }
}

/// Ball radius / bandwidth, noise kernel and ball norm.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpec {
    pub epsilon: f64,
    pub kernel: Kernel,
    pub norm: BallNorm,
}

impl PerturbationSpec {
    /// Indicator ABC with an L∞ ball.
    pub fn uniform(epsilon: f64) -> Self {
        PerturbationSpec {
            epsilon,
            kernel: Kernel::UniformBall,
            norm: BallNorm::Linf,
        }
    }

    pub fn smooth(epsilon: f64, kernel: SmoothKernel) -> Self {
        PerturbationSpec {
            epsilon,
            kernel: Kernel::Smooth(kernel),
            norm: BallNorm::Linf,
        }
    }

    pub fn with_norm(mut self, norm: BallNorm) -> Self {
        self.norm = norm;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::config("epsilon", format!("must be finite and ≥ 0, got {}", self.epsilon)));
        }
        Ok(())
    }

    /// Log of the θ-independent factor relating the ABC likelihood of one
    /// observation to the perturbed density: `log ν(B^ε)` for the indicator
    /// kernel, `m log ε` for a smooth kernel.
    pub fn log_abc_constant(&self, m: usize) -> f64 {
        match self.kernel {
            Kernel::UniformBall => ball_volume(self.norm, m, self.epsilon).ln(),
            Kernel::Smooth(_) => m as f64 * self.epsilon.ln(),
        }
    }

    /// Log ABC weight of a pseudo-observation `y_sim` against the datum `y_obs`.
    pub fn log_weight(&self, y_obs: &[f64], y_sim: &[f64]) -> f64 {
        match &self.kernel {
            Kernel::UniformBall => {
                if self.norm.distance(y_obs, y_sim) <= self.epsilon {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Kernel::Smooth(k) => y_obs
                .iter()
                .zip(y_sim)
                .map(|(a, b)| k.log_density_1d((a - b) / self.epsilon))
                .sum(),
        }
    }

    /// Largest possible (unnormalised) weight.
    pub fn max_weight(&self, m: usize) -> f64 {
        match &self.kernel {
            Kernel::UniformBall => 1.0,
            Kernel::Smooth(k) => k.sup(m),
        }
    }

    /// Draw one `Z` (unscaled) into `out`.
    pub fn sample_noise(&self, rng: &mut SimRng, out: &mut [f64]) {
        match &self.kernel {
            Kernel::UniformBall => ball_uniform(out.len(), self.norm, rng, out),
            Kernel::Smooth(k) => k.sample_into(rng, out),
        }
    }
}

/// The perturbed model `{X_k, Y_k + εZ_k}`.
#[derive(Debug, Clone)]
pub struct Perturbed<M> {
    base: M,
    spec: PerturbationSpec,
}

/// Build the perturbed model. Fails for ε ≤ 0 or a smooth kernel that
/// cannot be sampled.
pub fn perturb_model<M: HiddenMarkovModel>(model: M, pert: &PerturbationSpec) -> Result<Perturbed<M>> {
    pert.validate()?;
    if pert.epsilon <= 0.0 {
        return Err(Error::config("epsilon", "perturbation requires epsilon > 0"));
    }
    if let Kernel::Smooth(k) = &pert.kernel {
        if !k.has_sampler() {
            return Err(Error::config(
                "kernel",
                format!("smooth kernel `{}` has no registered sampler", k.name()),
            ));
        }
    }
    Ok(Perturbed {
        base: model,
        spec: pert.clone(),
    })
}

const UNIFORM_PANELS: usize = 400;
const SMOOTH_PANELS: usize = 4000;

impl<M: HiddenMarkovModel> Perturbed<M> {
    /// Density-only view used by the exact oracles; never sampled from.
    pub(crate) fn for_density(model: M, pert: &PerturbationSpec) -> Self {
        Perturbed {
            base: model,
            spec: pert.clone(),
        }
    }

    pub fn base(&self) -> &M {
        &self.base
    }

    pub fn spec(&self) -> &PerturbationSpec {
        &self.spec
    }

    fn scalar(&self) -> bool {
        self.base.obs_dim() == 1
    }
}

impl<M: HiddenMarkovModel> HiddenMarkovModel for Perturbed<M> {
    type State = M::State;

    fn name(&self) -> String {
        format!("{}+eps{}({})", self.base.name(), self.spec.epsilon, self.spec.kernel.name())
    }
    fn param_dim(&self) -> usize {
        self.base.param_dim()
    }
    fn obs_dim(&self) -> usize {
        self.base.obs_dim()
    }
    fn state_kind(&self) -> StateKind {
        self.base.state_kind()
    }
    fn parameter_box(&self) -> ParameterBox {
        self.base.parameter_box()
    }
    fn sample_initial(&self, theta: &[f64], rng: &mut SimRng) -> Self::State {
        self.base.sample_initial(theta, rng)
    }
    fn sample_transition(&self, theta: &[f64], prev: &Self::State, rng: &mut SimRng) -> Self::State {
        self.base.sample_transition(theta, prev, rng)
    }
    fn sample_observation(&self, theta: &[f64], state: &Self::State, rng: &mut SimRng, out: &mut [f64]) {
        self.base.sample_observation(theta, state, rng, out);
        let mut z = vec![0.0; out.len()];
        self.spec.sample_noise(rng, &mut z);
        for (o, zi) in out.iter_mut().zip(&z) {
            *o += self.spec.epsilon * zi;
        }
    }
    fn state_coords(&self, state: &Self::State) -> Vec<f64> {
        self.base.state_coords(state)
    }

    fn obs_density(&self, theta: &[f64], state: &Self::State, y: &[f64]) -> Option<f64> {
        if !self.scalar() {
            return None;
        }
        let eps = self.spec.epsilon;
        let y = y[0];
        match &self.spec.kernel {
            Kernel::UniformBall => {
                if let Some(p) = self.base.obs_interval_probability(theta, state, y - eps, y + eps) {
                    return Some(p / (2.0 * eps));
                }
                self.base.obs_density(theta, state, &[y])?;
                let mass = simpson(
                    |u| self.base.obs_density(theta, state, &[u]).unwrap_or(0.0),
                    y - eps,
                    y + eps,
                    UNIFORM_PANELS,
                );
                Some(mass / (2.0 * eps))
            }
            Kernel::Smooth(k) => {
                self.base.obs_density(theta, state, &[y])?;
                let w = k.half_width();
                Some(simpson(
                    |z| {
                        self.base.obs_density(theta, state, &[y - eps * z]).unwrap_or(0.0)
                            * k.log_density_1d(z).exp()
                    },
                    -w,
                    w,
                    SMOOTH_PANELS,
                ))
            }
        }
    }

    fn obs_density_gradient(&self, theta: &[f64], state: &Self::State, y: &[f64]) -> Option<Vec<f64>> {
        if !self.scalar() {
            return None;
        }
        let eps = self.spec.epsilon;
        let y = y[0];
        let d = self.base.param_dim();
        let integrate = |weight: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize| -> Option<Vec<f64>> {
            self.base.obs_density_gradient(theta, state, &[y])?;
            let mut out = vec![0.0; d];
            for (j, o) in out.iter_mut().enumerate() {
                *o = simpson(
                    |u| {
                        let g = self.base.obs_density_gradient(theta, state, &[u]);
                        g.map_or(0.0, |g| g[j]) * weight(u)
                    },
                    a,
                    b,
                    panels,
                );
            }
            Some(out)
        };
        match &self.spec.kernel {
            Kernel::UniformBall => {
                if self.base.obs_cdf(theta, state, y).is_some() {
                    let up = self.base.obs_cdf_gradient(theta, state, y + eps)?;
                    let down = self.base.obs_cdf_gradient(theta, state, y - eps)?;
                    return Some(up.iter().zip(&down).map(|(a, b)| (a - b) / (2.0 * eps)).collect());
                }
                let g = integrate(&|_| 1.0, y - eps, y + eps, UNIFORM_PANELS)?;
                Some(g.into_iter().map(|v| v / (2.0 * eps)).collect())
            }
            Kernel::Smooth(k) => {
                // substitute u = y − εz: ∫ ∇g(u) φ((y − u)/ε) du / ε
                let w = k.half_width() * eps;
                let g = integrate(
                    &|u| k.log_density_1d((y - u) / eps).exp() / eps,
                    y - w,
                    y + w,
                    SMOOTH_PANELS,
                )?;
                Some(g)
            }
        }
    }
}

impl<M: FiniteStateModel> FiniteStateModel for Perturbed<M> {
    fn num_states(&self) -> usize {
        self.base.num_states()
    }
    fn transition_matrix(&self, theta: &[f64]) -> DMatrix<f64> {
        self.base.transition_matrix(theta)
    }
    fn initial_distribution(&self, theta: &[f64]) -> DVector<f64> {
        self.base.initial_distribution(theta)
    }
    fn transition_jacobian(&self, theta: &[f64]) -> Vec<DMatrix<f64>> {
        self.base.transition_jacobian(theta)
    }
    fn initial_jacobian(&self, theta: &[f64]) -> Vec<DVector<f64>> {
        self.base.initial_jacobian(theta)
    }
}
