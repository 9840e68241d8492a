//! ABC, noisy-ABC, smoothed-ABC and exact maximum-likelihood estimators.
//!
//! Every estimator maximises a log-likelihood surface over the model's
//! parameter box. SMC objectives use one seed for every candidate θ (common
//! random numbers), so the surface is a deterministic function of θ and the
//! argmax is reproducible.

mod optimize;

pub use optimize::{grid_points, maximize, Maximum, Optimizer, TracePoint};

use crate::error::{Error, Result};
use crate::model::{HiddenMarkovModel, Kernel, ParameterBox, PerturbationSpec};
use crate::oracle::ExactLikelihood;
use crate::rng::{Purpose, StreamKey};
use crate::sampling::{fmt_f64, noisify_with_key, Trajectory};
use crate::smc::{smc_abc_likelihood, Resampling, SmcConfig};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Mutex;

/// Estimation procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Abc,
    NoisyAbc,
    SmoothedAbc,
    SmoothedNoisyAbc,
    ExactMle,
    ExactAbcMle,
}

impl Method {
    pub const NAMES: [&'static str; 6] = [
        "abc",
        "noisy_abc",
        "smoothed_abc",
        "smoothed_noisy_abc",
        "exact_mle",
        "exact_abc_mle",
    ];

    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::config("method", format!("unknown method `{s}` (expected one of {:?})", Self::NAMES)))
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Abc => "abc",
            Method::NoisyAbc => "noisy_abc",
            Method::SmoothedAbc => "smoothed_abc",
            Method::SmoothedNoisyAbc => "smoothed_noisy_abc",
            Method::ExactMle => "exact_mle",
            Method::ExactAbcMle => "exact_abc_mle",
        }
    }

    pub fn is_noisy(self) -> bool {
        matches!(self, Method::NoisyAbc | Method::SmoothedNoisyAbc)
    }
}

/// How the ABC log-likelihood is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Backend {
    Smc { num_particles: usize, resampling: Resampling },
    /// Exact computation via [`ExactLikelihood`].
    Oracle,
}

impl Backend {
    pub fn smc(num_particles: usize) -> Self {
        Backend::Smc {
            num_particles,
            resampling: Resampling::MultinomialAlways,
        }
    }
}

/// Settings recorded alongside an estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSettings {
    pub epsilon: Option<f64>,
    pub kernel: Option<String>,
    pub backend: Option<Backend>,
    pub n: usize,
    pub seed: u64,
    /// Seed of the data noisification (noisy methods only).
    pub noise_seed: Option<u64>,
    pub optimizer: Optimizer,
}

/// Output of an estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub method: Method,
    pub model: String,
    pub theta_hat: Vec<f64>,
    pub theta_box: ParameterBox,
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub objective_value: f64,
    pub objective_trace: Vec<TracePoint>,
    /// Candidates whose objective was −∞ (SMC collapse or zero likelihood).
    pub failures: usize,
    pub settings: EstimateSettings,
}

impl EstimateResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    /// Trace table `theta_1..theta_d,value,se`.
    pub fn write_trace_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let d = self.theta_hat.len();
        let mut header: Vec<String> = (1..=d).map(|i| format!("theta_{i}")).collect();
        header.push("value".into());
        header.push("se".into());
        w.write_record(&header)?;
        for t in &self.objective_trace {
            let mut row: Vec<String> = t.theta.iter().map(|&v| fmt_f64(v)).collect();
            row.push(fmt_f64(t.value));
            row.push(fmt_f64(t.se));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Run an objective that may fail through [`maximize`], surfacing the first
/// failure as the error.
fn maximize_fallible<F>(objective: F, bounds: &ParameterBox, optimizer: &Optimizer, seed: u64) -> Result<Maximum>
where
    F: Fn(&[f64]) -> Result<(f64, f64)> + Sync,
{
    let first_error = Mutex::new(None);
    let wrapped = |theta: &[f64]| match objective(theta) {
        Ok(v) => v,
        Err(e) => {
            first_error.lock().expect("poisoned").get_or_insert(e);
            (f64::NAN, f64::NAN)
        }
    };
    let result = maximize(wrapped, bounds, optimizer, seed);
    if let Some(e) = first_error.into_inner().expect("poisoned") {
        return Err(e);
    }
    result
}

/// The ABC log-likelihood surface `θ ↦ (log p̂^ε(data), se)`.
pub fn abc_objective<'a, M>(
    model: &'a M,
    data: &'a Trajectory,
    pert: &'a PerturbationSpec,
    backend: &'a Backend,
    seed: u64,
) -> impl Fn(&[f64]) -> Result<(f64, f64)> + Sync + 'a
where
    M: HiddenMarkovModel + ExactLikelihood,
{
    move |theta: &[f64]| match backend {
        Backend::Smc {
            num_particles,
            resampling,
        } => {
            let cfg = SmcConfig::new(*num_particles, seed).resampling(*resampling);
            let est = smc_abc_likelihood(model, theta, data, pert, &cfg)?;
            Ok((est.log_value, est.log_se_proxy))
        }
        Backend::Oracle => Ok((model.exact_abc_loglik(theta, data, pert)?, 0.0)),
    }
}

fn check_epsilon(pert: &PerturbationSpec) -> Result<()> {
    pert.validate()?;
    if pert.epsilon > 0.0 {
        Ok(())
    } else {
        Err(Error::config("epsilon", "ABC estimation requires epsilon > 0"))
    }
}

fn run_abc<M>(
    method: Method,
    model: &M,
    data: &Trajectory,
    pert: &PerturbationSpec,
    backend: &Backend,
    optimizer: &Optimizer,
    seed: u64,
    noise_seed: Option<u64>,
) -> Result<EstimateResult>
where
    M: HiddenMarkovModel + ExactLikelihood,
{
    let bounds = model.parameter_box();
    let max = maximize_fallible(abc_objective(model, data, pert, backend, seed), &bounds, optimizer, seed)?;
    Ok(EstimateResult {
        method,
        model: model.name(),
        theta_hat: max.theta_hat,
        theta_box: bounds,
        objective_value: max.value,
        objective_trace: max.trace,
        failures: max.failures,
        settings: EstimateSettings {
            epsilon: Some(pert.epsilon),
            kernel: Some(pert.kernel.name().to_string()),
            backend: Some(backend.clone()),
            n: data.len(),
            seed,
            noise_seed,
            optimizer: optimizer.clone(),
        },
    })
}

/// ABC MLE: maximise the ABC likelihood of un-noisified data.
pub fn abc_mle<M>(
    model: &M,
    data: &Trajectory,
    pert: &PerturbationSpec,
    backend: &Backend,
    optimizer: &Optimizer,
    seed: u64,
) -> Result<EstimateResult>
where
    M: HiddenMarkovModel + ExactLikelihood,
{
    check_epsilon(pert)?;
    if data.is_noisified() {
        return Err(Error::Usage(
            "data are already noisified; estimate them with noisy_abc_mle instead".into(),
        ));
    }
    let method = match (&pert.kernel, backend) {
        (Kernel::Smooth(_), _) => Method::SmoothedAbc,
        (Kernel::UniformBall, Backend::Oracle) => Method::ExactAbcMle,
        (Kernel::UniformBall, Backend::Smc { .. }) => Method::Abc,
    };
    run_abc(method, model, data, pert, backend, optimizer, seed, None)
}

/// Noise key used by [`noisy_abc_mle`] for a given seed. Independent of every
/// SMC stream under the same seed.
pub fn noise_key(seed: u64) -> StreamKey {
    StreamKey::new(seed, Purpose::Noise)
}

/// Noisy ABC MLE: add `εẐ_k` to the data, then maximise the ABC likelihood
/// of the noisified trajectory with the same ε and kernel.
///
/// Data that were already noisified with this ε and kernel are used as they
/// are, so an estimate can be repeated on fixed noisy data.
pub fn noisy_abc_mle<M>(
    model: &M,
    data: &Trajectory,
    pert: &PerturbationSpec,
    backend: &Backend,
    optimizer: &Optimizer,
    seed: u64,
) -> Result<EstimateResult>
where
    M: HiddenMarkovModel + ExactLikelihood,
{
    check_epsilon(pert)?;
    let (noisy, noise_seed) = match data.meta.noise_epsilon {
        None => (noisify_with_key(data, pert, noise_key(seed))?, Some(seed)),
        Some(e) if e == pert.epsilon && data.meta.noise_kernel.as_deref() == Some(pert.kernel.name()) => {
            (data.clone(), None)
        }
        Some(e) => {
            return Err(Error::Usage(format!(
                "data were noisified with epsilon {e} ({}), not {} ({})",
                data.meta.noise_kernel.as_deref().unwrap_or("?"),
                pert.epsilon,
                pert.kernel.name()
            )))
        }
    };
    let method = if pert.kernel.is_smooth() {
        Method::SmoothedNoisyAbc
    } else {
        Method::NoisyAbc
    };
    run_abc(method, model, &noisy, pert, backend, optimizer, seed, noise_seed)
}

/// Exact MLE by maximising the exact log-likelihood.
pub fn exact_mle<M>(model: &M, data: &Trajectory, optimizer: &Optimizer) -> Result<EstimateResult>
where
    M: HiddenMarkovModel + ExactLikelihood,
{
    let bounds = model.parameter_box();
    let max = maximize_fallible(|t| Ok((model.exact_loglik(t, data)?, 0.0)), &bounds, optimizer, 0)?;
    Ok(EstimateResult {
        method: Method::ExactMle,
        model: model.name(),
        theta_hat: max.theta_hat,
        theta_box: bounds,
        objective_value: max.value,
        objective_trace: max.trace,
        failures: max.failures,
        settings: EstimateSettings {
            epsilon: None,
            kernel: None,
            backend: None,
            n: data.len(),
            seed: 0,
            noise_seed: None,
            optimizer: optimizer.clone(),
        },
    })
}

/// Dispatch on [`Method`]. The kernel of `pert` must agree with the method
/// (smooth for the smoothed variants, uniform otherwise).
pub fn estimate<M>(
    method: Method,
    model: &M,
    data: &Trajectory,
    pert: &PerturbationSpec,
    backend: &Backend,
    optimizer: &Optimizer,
    seed: u64,
) -> Result<EstimateResult>
where
    M: HiddenMarkovModel + ExactLikelihood,
{
    let smooth_method = matches!(method, Method::SmoothedAbc | Method::SmoothedNoisyAbc);
    if method != Method::ExactMle && smooth_method != pert.kernel.is_smooth() {
        return Err(Error::config(
            "kernel",
            format!("method `{}` does not accept kernel `{}`", method.name(), pert.kernel.name()),
        ));
    }
    match method {
        Method::ExactMle => exact_mle(model, data, optimizer),
        Method::ExactAbcMle => abc_mle(model, data, pert, &Backend::Oracle, optimizer, seed),
        Method::Abc | Method::SmoothedAbc => abc_mle(model, data, pert, backend, optimizer, seed),
        Method::NoisyAbc | Method::SmoothedNoisyAbc => noisy_abc_mle(model, data, pert, backend, optimizer, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BuiltinModel, ParameterVector};
    use crate::sampling::simulate;
    use serde_json::json;

    fn iid_data() -> (BuiltinModel, Trajectory) {
        let m = BuiltinModel::from_name("iid_pm_theta", &json!({})).unwrap();
        let theta = ParameterVector::for_model(&m, vec![1.0]).unwrap();
        let data = simulate(&m, &theta, 100, 7).unwrap();
        (m, data)
    }

    #[test]
    fn plain_abc_pathology_on_grid() {
        let (m, data) = iid_data();
        let r = abc_mle(
            &m,
            &data,
            &PerturbationSpec::uniform(1.5),
            &Backend::Oracle,
            &Optimizer::Grid { step: 0.01 },
            1,
        )
        .unwrap();
        assert_eq!(r.theta_hat, vec![0.0]);
        assert_eq!(r.objective_value, 0.0);
        assert_eq!(r.method, Method::ExactAbcMle);
    }

    #[test]
    fn small_epsilon_lands_near_truth() {
        let (m, data) = iid_data();
        let r = abc_mle(
            &m,
            &data,
            &PerturbationSpec::uniform(0.1),
            &Backend::Oracle,
            &Optimizer::Grid { step: 0.01 },
            1,
        )
        .unwrap();
        assert!((r.theta_hat[0] - 1.0).abs() <= 0.1);
    }

    #[test]
    fn smc_pathology_matches_oracle() {
        let (m, data) = iid_data();
        let r = abc_mle(
            &m,
            &data,
            &PerturbationSpec::uniform(1.5),
            &Backend::smc(64),
            &Optimizer::Grid { step: 0.1 },
            3,
        )
        .unwrap();
        assert_eq!(r.theta_hat, vec![0.0]);
    }

    #[test]
    fn crn_determinism() {
        let m = BuiltinModel::from_name("finite_gaussian", &json!({})).unwrap();
        let theta = ParameterVector::for_model(&m, vec![1.0]).unwrap();
        let data = simulate(&m, &theta, 30, 5).unwrap();
        let run = || {
            abc_mle(
                &m,
                &data,
                &PerturbationSpec::uniform(0.5),
                &Backend::smc(200),
                &Optimizer::Grid { step: 0.25 },
                9,
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn noisified_data_rejected_by_plain_abc() {
        let (m, data) = iid_data();
        let pert = PerturbationSpec::uniform(1.5);
        let noisy = noisify_with_key(&data, &pert, noise_key(3)).unwrap();
        let grid = Optimizer::Grid { step: 0.01 };
        assert!(matches!(abc_mle(&m, &noisy, &pert, &Backend::Oracle, &grid, 1), Err(Error::Usage(_))));
        let a = noisy_abc_mle(&m, &noisy, &pert, &Backend::Oracle, &grid, 1).unwrap();
        let b = noisy_abc_mle(&m, &data, &pert, &Backend::Oracle, &grid, 3).unwrap();
        assert_eq!(a.theta_hat, b.theta_hat);
    }

    #[test]
    fn oracle_unsupported_is_an_error() {
        let m = BuiltinModel::from_name("two_state_alpha_stable", &json!({})).unwrap();
        let theta = ParameterVector::for_model(&m, vec![1.0, 0.0]).unwrap();
        let data = simulate(&m, &theta, 10, 5).unwrap();
        let r = abc_mle(
            &m,
            &data,
            &PerturbationSpec::uniform(0.5),
            &Backend::Oracle,
            &Optimizer::Grid { step: 1.0 },
            1,
        );
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }

    #[test]
    fn json_and_csv_outputs() {
        let (m, data) = iid_data();
        let r = abc_mle(
            &m,
            &data,
            &PerturbationSpec::uniform(0.1),
            &Backend::Oracle,
            &Optimizer::Grid { step: 0.5 },
            1,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        r.write_json(&dir.path().join("r.json")).unwrap();
        r.write_trace_csv(&dir.path().join("r.csv")).unwrap();
        let back: EstimateResult =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
        assert_eq!(back, r);
        let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
        assert!(csv.starts_with("theta_1,value,se\n0,-inf,0\n"));
    }
}
