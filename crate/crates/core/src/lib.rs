//! Maximum-likelihood estimation for hidden Markov models whose observation
//! densities cannot be evaluated but can be sampled from.
//!
//! The likelihood of a perturbed model (observations blurred by an
//! `ε`-ball or a smooth kernel) is estimated by sequential Monte Carlo and
//! maximised over a parameter box. Noisy ABC adds the same perturbation to
//! the data first, which removes the asymptotic bias of plain ABC. Exact
//! forward-algorithm oracles for finite-state models back the tests, the
//! bias studies and the Fisher-information comparisons.
//!
//! ```no_run
//! use abc_hmm::model::{BuiltinModel, ParameterVector, PerturbationSpec};
//! use abc_hmm::sampling::simulate;
//! use abc_hmm::smc::{smc_abc_likelihood, SmcConfig};
//!
//! let model = BuiltinModel::from_name("two_state_alpha_stable", &serde_json::json!({})).unwrap();
//! let theta = ParameterVector::for_model(&model, vec![1.0, 0.0]).unwrap();
//! let data = simulate(&model, &theta, 500, 7).unwrap();
//! let est = smc_abc_likelihood(&model, theta.values(), &data, &PerturbationSpec::uniform(0.5), &SmcConfig::new(1000, 1)).unwrap();
//! println!("log p^eps = {}", est.log_value);
//! ```

pub mod cli;
pub mod error;
pub mod estimate;
pub mod experiments;
pub mod fisher;
pub mod model;
pub mod numeric;
pub mod oracle;
pub mod rng;
pub mod sampling;
pub mod serde_ext;
pub mod smc;

pub use error::{Error, Result};
