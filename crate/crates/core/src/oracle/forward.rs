//! Scaled forward recursion with optional parameter sensitivities.

use crate::error::{Error, Result};
use crate::model::{FiniteStateModel, HiddenMarkovModel, PerturbationSpec, Perturbed};
use crate::sampling::Trajectory;
use nalgebra::{DMatrix, DVector};

/// How the observation at one step enters the likelihood.
#[derive(Debug, Clone, Copy)]
pub enum Emission<'a> {
    /// `g_θ(y | x)`.
    Plain,
    /// `g^ε_θ(y | x)`; ε = 0 falls back to [`Emission::Plain`].
    Perturbed(&'a PerturbationSpec),
    /// Observation marginalised out (`g ≡ 1`).
    Missing,
}

/// Filter after `step` observations.
#[derive(Debug, Clone)]
pub struct ForwardState {
    /// `log p_θ(y_1..y_k)`.
    pub log_scale: f64,
    /// `p(x_k | y_1..y_k)`, or the initial law before the first step.
    pub alpha: DVector<f64>,
    /// `∂alpha/∂θ_j` for each coordinate, when tracked.
    pub dalpha: Option<Vec<DVector<f64>>>,
    pub step: usize,
}

/// Result of one filter step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    /// `log p_θ(y_k | y_1..y_{k−1})`.
    pub log_c: f64,
    /// `∇_θ log p_θ(y_k | y_1..y_{k−1})`, when sensitivities are tracked.
    pub score_increment: Option<Vec<f64>>,
}

/// Forward filter for a finite-state model, advanced one observation at a time.
///
/// The hidden chain starts at `X_0 ~ π₀` and moves once before every
/// observation, matching [`crate::sampling::simulate`].
pub struct ForwardFilter<'a, M: FiniteStateModel> {
    model: &'a M,
    theta: Vec<f64>,
    qt: DMatrix<f64>,
    dqt: Option<Vec<DMatrix<f64>>>,
    state: ForwardState,
}

impl<'a, M: FiniteStateModel> ForwardFilter<'a, M> {
    /// Start from the model's initial law; `gradient` turns on sensitivity tracking.
    pub fn new(model: &'a M, theta: &[f64], gradient: bool) -> Self {
        let init = model.initial_distribution(theta);
        let dinit = gradient.then(|| model.initial_jacobian(theta));
        Self::start(model, theta, init, dinit)
    }

    /// Start from an arbitrary (θ-independent) law of `X_0`.
    pub fn with_initial(model: &'a M, theta: &[f64], init: DVector<f64>, gradient: bool) -> Self {
        let d = model.param_dim();
        let k = init.len();
        let dinit = gradient.then(|| vec![DVector::zeros(k); d]);
        Self::start(model, theta, init, dinit)
    }

    fn start(model: &'a M, theta: &[f64], init: DVector<f64>, dinit: Option<Vec<DVector<f64>>>) -> Self {
        let dqt = dinit
            .as_ref()
            .map(|_| model.transition_jacobian(theta).iter().map(|m| m.transpose()).collect());
        ForwardFilter {
            model,
            theta: theta.to_vec(),
            qt: model.transition_matrix(theta).transpose(),
            dqt,
            state: ForwardState {
                log_scale: 0.0,
                alpha: init,
                dalpha: dinit,
                step: 0,
            },
        }
    }

    pub fn state(&self) -> &ForwardState {
        &self.state
    }

    pub fn into_state(self) -> ForwardState {
        self.state
    }

    /// Emission values and, when tracked, their gradients for every state.
    fn emission(&self, y: &[f64], em: Emission) -> Result<(Vec<f64>, Option<Vec<Vec<f64>>>)> {
        let k = self.model.num_states();
        let d = self.model.param_dim();
        let grad = self.dqt.is_some();
        let theta = &self.theta;
        match em {
            Emission::Missing => Ok((vec![1.0; k], grad.then(|| vec![vec![0.0; d]; k]))),
            Emission::Perturbed(p) if p.epsilon > 0.0 => {
                let pm = Perturbed::for_density(self.model, p);
                evaluate(&pm, theta, y, k, grad)
            }
            _ => evaluate(self.model, theta, y, k, grad),
        }
    }

    /// Condition on the next observation.
    pub fn step(&mut self, y: &[f64], em: Emission) -> Result<StepOutput> {
        if self.state.log_scale == f64::NEG_INFINITY {
            self.state.step += 1;
            return Ok(StepOutput {
                log_c: f64::NEG_INFINITY,
                score_increment: None,
            });
        }
        let (e, de) = self.emission(y, em)?;
        let qt = &self.qt;
        let p = qt * &self.state.alpha;
        let u = DVector::from_iterator(p.len(), p.iter().zip(&e).map(|(a, b)| a * b));
        let c = u.sum();
        self.state.step += 1;
        if !(c > 0.0 && c.is_finite()) {
            self.state.log_scale = f64::NEG_INFINITY;
            self.state.dalpha = None;
            return Ok(StepOutput {
                log_c: f64::NEG_INFINITY,
                score_increment: None,
            });
        }
        let alpha = &u / c;
        let mut increment = None;
        if let (Some(dqt), Some(dalpha), Some(de)) = (&self.dqt, &self.state.dalpha, de) {
            let mut inc = Vec::with_capacity(dqt.len());
            let mut next = Vec::with_capacity(dqt.len());
            for (j, (dqj, daj)) in dqt.iter().zip(dalpha).enumerate() {
                let dp = qt * daj + dqj * &self.state.alpha;
                let du = DVector::from_iterator(
                    p.len(),
                    (0..p.len()).map(|i| dp[i] * e[i] + p[i] * de[i][j]),
                );
                let dc = du.sum();
                next.push((du - &alpha * dc) / c);
                inc.push(dc / c);
            }
            self.state.dalpha = Some(next);
            increment = Some(inc);
        }
        self.state.alpha = alpha;
        self.state.log_scale += c.ln();
        Ok(StepOutput {
            log_c: c.ln(),
            score_increment: increment,
        })
    }
}

fn evaluate<M: HiddenMarkovModel<State = usize>>(
    model: &M,
    theta: &[f64],
    y: &[f64],
    k: usize,
    grad: bool,
) -> Result<(Vec<f64>, Option<Vec<Vec<f64>>>)> {
    let unsupported = || Error::Unsupported(format!("model `{}` has no tractable observation density", model.name()));
    let e = (0..k)
        .map(|x| model.obs_density(theta, &x, y).ok_or_else(unsupported))
        .collect::<Result<Vec<_>>>()?;
    let de = if grad {
        Some(
            (0..k)
                .map(|x| {
                    model.obs_density_gradient(theta, &x, y).ok_or_else(|| {
                        Error::Unsupported(format!("model `{}` has no differentiable observation density", model.name()))
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    Ok((e, de))
}

/// Exact `log p_θ(y_1..y_n)`, or `log p^ε_θ` (perturbed-model density) when
/// `pert` is given.
pub fn forward_loglik<M: FiniteStateModel>(
    model: &M,
    theta: &[f64],
    data: &Trajectory,
    pert: Option<&PerturbationSpec>,
) -> Result<f64> {
    let em = emission_for(pert);
    let mut f = ForwardFilter::new(model, theta, false);
    for y in data.rows() {
        if f.step(y, em)?.log_c == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
    }
    Ok(f.state().log_scale)
}

/// `∇_θ log p_θ(y_1..y_n)` (or of `p^ε_θ`) by sensitivity propagation.
pub fn forward_score<M: FiniteStateModel>(
    model: &M,
    theta: &[f64],
    data: &Trajectory,
    pert: Option<&PerturbationSpec>,
) -> Result<Vec<f64>> {
    let mut total = vec![0.0; model.param_dim()];
    for h in forward_score_increments(model, theta, data, pert)? {
        for (t, v) in total.iter_mut().zip(h) {
            *t += v;
        }
    }
    Ok(total)
}

/// Per-step score increments `∇_θ log p_θ(y_k | y_1..y_{k−1})`; they sum to
/// the score.
pub fn forward_score_increments<M: FiniteStateModel>(
    model: &M,
    theta: &[f64],
    data: &Trajectory,
    pert: Option<&PerturbationSpec>,
) -> Result<Vec<Vec<f64>>> {
    let em = emission_for(pert);
    let mut f = ForwardFilter::new(model, theta, true);
    let mut out = Vec::with_capacity(data.len());
    for (k, y) in data.rows().enumerate() {
        let s = f.step(y, em)?;
        match s.score_increment {
            Some(h) => out.push(h),
            None => {
                return Err(Error::Domain(format!(
                    "likelihood is zero at step {}; the score is undefined",
                    k + 1
                )))
            }
        }
    }
    Ok(out)
}

fn emission_for(pert: Option<&PerturbationSpec>) -> Emission<'_> {
    match pert {
        Some(p) => Emission::Perturbed(p),
        None => Emission::Plain,
    }
}
