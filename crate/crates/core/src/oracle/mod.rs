//! Exact likelihoods for tractable models: the scaled forward algorithm for
//! finite-state chains, the closed-form i.i.d. `±θ` ABC probability, score
//! functions by sensitivity propagation, and filter-forgetting diagnostics.

mod forward;
mod iid;
mod stability;

pub use forward::{
    forward_loglik, forward_score, forward_score_increments, Emission, ForwardFilter, ForwardState, StepOutput,
};
pub use iid::{iid_abc_likelihood, iid_abc_loglik, iid_ball_probability, iid_loglik};
pub use stability::{filter_tv_forgetting, forgetting_rate, point_mass, total_variation, ForgettingBound};

use crate::error::{Error, Result};
use crate::model::{BuiltinModel, FiniteGaussian, IidPmTheta, PerturbationSpec, TwoStateAlphaStable};
use crate::sampling::Trajectory;

/// Models whose (ABC) likelihood can be computed exactly. Both methods
/// default to [`Error::Unsupported`], so a custom model opts in with an
/// empty `impl` and can then be used with the SMC backend only.
pub trait ExactLikelihood {
    /// `log p_θ(Ŷ_1..Ŷ_n)`.
    fn exact_loglik(&self, _theta: &[f64], _data: &Trajectory) -> Result<f64> {
        Err(Error::Unsupported("no exact likelihood for this model; use the SMC backend".into()))
    }

    /// Log of the quantity the SMC estimator targets: `log P_θ(Y_k ∈ B^ε_{Ŷ_k} ∀k)`
    /// for the indicator kernel, `log E ∏ φ((Ŷ_k − Y_k)/ε)` for a smooth one.
    fn exact_abc_loglik(&self, _theta: &[f64], _data: &Trajectory, _pert: &PerturbationSpec) -> Result<f64> {
        Err(Error::Unsupported("no exact ABC likelihood for this model; use the SMC backend".into()))
    }
}

impl<M: crate::model::HiddenMarkovModel> ExactLikelihood for crate::model::Summarized<M> {}

impl ExactLikelihood for FiniteGaussian {
    fn exact_loglik(&self, theta: &[f64], data: &Trajectory) -> Result<f64> {
        forward_loglik(self, theta, data, None)
    }

    fn exact_abc_loglik(&self, theta: &[f64], data: &Trajectory, pert: &PerturbationSpec) -> Result<f64> {
        if pert.epsilon <= 0.0 {
            return Err(Error::config("epsilon", "ABC likelihood requires epsilon > 0"));
        }
        let ll = forward_loglik(self, theta, data, Some(pert))?;
        Ok(ll + data.len() as f64 * pert.log_abc_constant(data.obs_dim()))
    }
}

impl ExactLikelihood for IidPmTheta {
    fn exact_loglik(&self, theta: &[f64], data: &Trajectory) -> Result<f64> {
        Ok(iid_loglik(theta[0], data.observations()))
    }

    fn exact_abc_loglik(&self, theta: &[f64], data: &Trajectory, pert: &PerturbationSpec) -> Result<f64> {
        if pert.epsilon <= 0.0 {
            return Err(Error::config("epsilon", "ABC likelihood requires epsilon > 0"));
        }
        Ok(iid_abc_loglik(theta[0], data.observations(), pert))
    }
}

impl ExactLikelihood for TwoStateAlphaStable {
    fn exact_loglik(&self, _theta: &[f64], _data: &Trajectory) -> Result<f64> {
        Err(Error::Unsupported("two_state_alpha_stable has no exact likelihood; use the SMC backend".into()))
    }

    fn exact_abc_loglik(&self, theta: &[f64], data: &Trajectory, _pert: &PerturbationSpec) -> Result<f64> {
        self.exact_loglik(theta, data)
    }
}

impl ExactLikelihood for BuiltinModel {
    fn exact_loglik(&self, theta: &[f64], data: &Trajectory) -> Result<f64> {
        match self {
            BuiltinModel::TwoStateAlphaStable(m) => m.exact_loglik(theta, data),
            BuiltinModel::FiniteGaussian(m) => m.exact_loglik(theta, data),
            BuiltinModel::IidPmTheta(m) => m.exact_loglik(theta, data),
        }
    }

    fn exact_abc_loglik(&self, theta: &[f64], data: &Trajectory, pert: &PerturbationSpec) -> Result<f64> {
        match self {
            BuiltinModel::TwoStateAlphaStable(m) => m.exact_abc_loglik(theta, data, pert),
            BuiltinModel::FiniteGaussian(m) => m.exact_abc_loglik(theta, data, pert),
            BuiltinModel::IidPmTheta(m) => m.exact_abc_loglik(theta, data, pert),
        }
    }
}

impl<T: ExactLikelihood + ?Sized> ExactLikelihood for &T {
    fn exact_loglik(&self, theta: &[f64], data: &Trajectory) -> Result<f64> {
        (**self).exact_loglik(theta, data)
    }

    fn exact_abc_loglik(&self, theta: &[f64], data: &Trajectory, pert: &PerturbationSpec) -> Result<f64> {
        (**self).exact_abc_loglik(theta, data, pert)
    }
}
