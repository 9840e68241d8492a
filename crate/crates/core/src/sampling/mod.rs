//! Reproducible simulation: trajectories, ball-uniform noise, α-stable draws
//! and the noisified data used by noisy ABC.

mod io;
mod stable;

pub use io::{read_trajectory, sidecar_path, write_trajectory};
pub(crate) use io::fmt_f64;
pub use stable::alpha_stable;

use crate::error::{Error, Result};
use crate::model::{HiddenMarkovModel, Kernel, ParameterVector, PerturbationSpec};
use crate::rng::{Purpose, SimRng, StreamKey};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Provenance of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub seed: u64,
    pub model: String,
    pub theta: Vec<f64>,
    /// Present iff the observations were noisified.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_kernel: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
}

impl TrajectoryMeta {
    pub fn new(model: impl Into<String>, seed: u64, theta: Vec<f64>) -> Self {
        TrajectoryMeta {
            seed,
            model: model.into(),
            theta,
            noise_epsilon: None,
            noise_kernel: None,
            summary: None,
        }
    }
}

/// An observed or simulated sequence `Ŷ_1, …, Ŷ_n` (row-major `n × m`).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    observations: Vec<f64>,
    obs_dim: usize,
    pub hidden: Option<Vec<Vec<f64>>>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn from_parts(
        observations: Vec<f64>,
        obs_dim: usize,
        hidden: Option<Vec<Vec<f64>>>,
        meta: TrajectoryMeta,
    ) -> Result<Self> {
        if obs_dim == 0 || observations.is_empty() || observations.len() % obs_dim != 0 {
            return Err(Error::Domain(format!(
                "{} values do not form a non-empty n × {obs_dim} observation matrix",
                observations.len()
            )));
        }
        let n = observations.len() / obs_dim;
        if let Some(h) = &hidden {
            if h.len() != n {
                return Err(Error::Domain(format!("{} hidden states for {n} observations", h.len())));
            }
        }
        Ok(Trajectory {
            observations,
            obs_dim,
            hidden,
            meta,
        })
    }

    /// Scalar observations with no hidden states.
    pub fn from_scalars(values: Vec<f64>, meta: TrajectoryMeta) -> Result<Self> {
        Self::from_parts(values, 1, None, meta)
    }

    /// Externally observed scalar data (no simulation provenance).
    pub fn observed(values: &[f64]) -> Result<Self> {
        Self::from_scalars(values.to_vec(), TrajectoryMeta::new("observed", 0, Vec::new()))
    }

    pub fn len(&self) -> usize {
        self.observations.len() / self.obs_dim
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn observations(&self) -> &[f64] {
        &self.observations
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.observations[k * self.obs_dim..(k + 1) * self.obs_dim]
    }

    pub fn rows(&self) -> std::slice::Chunks<'_, f64> {
        self.observations.chunks(self.obs_dim)
    }

    pub fn is_noisified(&self) -> bool {
        self.meta.noise_epsilon.is_some()
    }
}

/// Draw from the model law: `X_0 ~ π₀`, `X_k ~ q_θ(X_{k−1}, ·)`, `Y_k ~ g_θ(·|X_k)`.
pub fn simulate<M: HiddenMarkovModel>(
    model: &M,
    theta: &ParameterVector,
    n: usize,
    seed: u64,
) -> Result<Trajectory> {
    simulate_with_key(model, theta, n, StreamKey::new(seed, Purpose::Simulate))
}

/// [`simulate`] on an explicit stream (e.g. one per replicate).
pub fn simulate_with_key<M: HiddenMarkovModel>(
    model: &M,
    theta: &ParameterVector,
    n: usize,
    key: StreamKey,
) -> Result<Trajectory> {
    if n == 0 {
        return Err(Error::Domain("trajectory length must be at least 1".into()));
    }
    if !model.parameter_box().contains(theta.values()) {
        return Err(Error::Domain(format!(
            "theta {:?} is outside the box of `{}`",
            theta.values(),
            model.name()
        )));
    }
    let th = theta.values();
    let m = model.obs_dim();
    let mut rng = key.rng();
    let mut x = model.sample_initial(th, &mut rng);
    let mut obs = vec![0.0; n * m];
    let mut hidden = Vec::with_capacity(n);
    for row in obs.chunks_mut(m) {
        x = model.sample_transition(th, &x, &mut rng);
        model.sample_observation(th, &x, &mut rng, row);
        hidden.push(model.state_coords(&x));
    }
    let meta = TrajectoryMeta::new(model.name(), key.seed, th.to_vec());
    Trajectory::from_parts(obs, m, Some(hidden), meta)
}

/// A point uniform on the unit ball of `norm` in `m` dimensions.
pub fn ball_uniform(m: usize, norm: crate::model::BallNorm, rng: &mut SimRng, out: &mut [f64]) {
    debug_assert_eq!(out.len(), m);
    match norm {
        crate::model::BallNorm::Linf => {
            for v in out.iter_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
        }
        crate::model::BallNorm::L2 => {
            if m == 1 {
                out[0] = rng.random_range(-1.0..1.0);
                return;
            }
            let mut r2 = 0.0;
            for v in out.iter_mut() {
                *v = rng.sample(StandardNormal);
                r2 += *v * *v;
            }
            let radius = rng.random::<f64>().powf(1.0 / m as f64) / r2.sqrt();
            for v in out.iter_mut() {
                *v *= radius;
            }
        }
    }
}

/// Replace `Ŷ_k` by `Ŷ_k + εẐ_k`, `Ẑ_k` i.i.d. from the perturbation kernel.
pub fn noisify(traj: &Trajectory, pert: &PerturbationSpec, seed: u64) -> Result<Trajectory> {
    noisify_with_key(traj, pert, StreamKey::new(seed, Purpose::Noise))
}

pub fn noisify_with_key(traj: &Trajectory, pert: &PerturbationSpec, key: StreamKey) -> Result<Trajectory> {
    if traj.is_noisified() {
        return Err(Error::Usage("trajectory has already been noisified".into()));
    }
    pert.validate()?;
    if let Kernel::Smooth(k) = &pert.kernel {
        if !k.has_sampler() {
            return Err(Error::config("kernel", format!("kernel `{}` has no sampler", k.name())));
        }
    }
    let mut out = traj.clone();
    if pert.epsilon > 0.0 {
        let mut rng = key.rng();
        let mut z = vec![0.0; traj.obs_dim()];
        for row in out.observations.chunks_mut(traj.obs_dim()) {
            pert.sample_noise(&mut rng, &mut z);
            for (y, zi) in row.iter_mut().zip(&z) {
                *y += pert.epsilon * zi;
            }
        }
    }
    out.meta.noise_epsilon = Some(pert.epsilon);
    out.meta.noise_kernel = Some(pert.kernel.name().to_string());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BallNorm, BuiltinModel, ModelConfig};
    use crate::numeric::{mean, sample_sd};
    use serde_json::json;

    fn rng(i: u64) -> SimRng {
        StreamKey::new(2024, Purpose::Test).index(i).rng()
    }

    #[test]
    fn iid_observations_are_plus_minus_theta() {
        let m = ModelConfig::named("iid_pm_theta").build().unwrap();
        let theta = ParameterVector::for_model(&m, vec![2.0]).unwrap();
        let t = simulate(&m, &theta, 5, 1).unwrap();
        assert!(t.observations().iter().all(|&y| y == 2.0 || y == -2.0));
    }

    #[test]
    fn simulate_is_deterministic_and_validates() {
        let m = ModelConfig::named("finite_gaussian").build().unwrap();
        let theta = ParameterVector::for_model(&m, vec![1.0]).unwrap();
        let a = simulate(&m, &theta, 50, 9).unwrap();
        let b = simulate(&m, &theta, 50, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, simulate(&m, &theta, 50, 10).unwrap());
        assert!(simulate(&m, &theta, 0, 9).is_err());
    }

    #[test]
    fn symmetric_chain_visits_states_equally() {
        let m = BuiltinModel::from_name("finite_gaussian", &json!({"p01": 0.3, "p10": 0.3})).unwrap();
        let theta = ParameterVector::for_model(&m, vec![1.0]).unwrap();
        let n = 100_000;
        let t = simulate(&m, &theta, n, 11).unwrap();
        let ones = t.hidden.as_ref().unwrap().iter().filter(|h| h[0] == 1.0).count() as f64;
        let freq = ones / n as f64;
        // Markov-chain SE: sqrt(p(1−p)/n · (1+λ)/(1−λ)), λ = 0.4
        let se = (0.25 / n as f64 * 1.4 / 0.6).sqrt();
        assert!((freq - 0.5).abs() < 3.0 * se, "freq {freq}, se {se}");
    }

    #[test]
    fn alpha_stable_model_median_offset_is_delta() {
        let m = BuiltinModel::from_name("two_state_alpha_stable", &json!({"alpha": 1.8})).unwrap();
        let theta = ParameterVector::for_model(&m, vec![1.0, 0.0]).unwrap();
        let n = 100_000;
        let t = simulate(&m, &theta, n, 5).unwrap();
        let mut resid: Vec<f64> = t
            .rows()
            .zip(t.hidden.as_ref().unwrap())
            .map(|(y, h)| y[0] - h[0])
            .collect();
        resid.sort_by(f64::total_cmp);
        let med = resid[n / 2];
        // SE of the median: 1/(2 f(0) √n), with f(0) = Γ(1 + 1/α)/π for S_α(1, 0, 0)
        let f0 = statrs::function::gamma::gamma(1.0 + 1.0 / 1.8) / std::f64::consts::PI;
        let se = 1.0 / (2.0 * f0 * (n as f64).sqrt());
        assert!(med.abs() < 3.0 * se, "median {med}, se {se}");
    }

    #[test]
    fn ball_uniform_moments_in_one_dimension() {
        for norm in [BallNorm::Linf, BallNorm::L2] {
            let mut r = rng(1);
            let n = 1_000_000;
            let mut v = [0.0];
            let draws: Vec<f64> = (0..n)
                .map(|_| {
                    ball_uniform(1, norm, &mut r, &mut v);
                    v[0]
                })
                .collect();
            let m = mean(&draws);
            let var = sample_sd(&draws).powi(2);
            assert!(m.abs() < 3.0 * (1.0f64 / 3.0 / n as f64).sqrt());
            // Var(U²) = 1/5 − 1/9 = 4/45
            assert!((var - 1.0 / 3.0).abs() < 3.0 * (4.0f64 / 45.0 / n as f64).sqrt());
        }
    }

    #[test]
    fn linf_marginals_are_uniform() {
        let mut r = rng(2);
        let n = 100_000;
        let mut cols = vec![Vec::with_capacity(n); 3];
        let mut v = [0.0; 3];
        for _ in 0..n {
            ball_uniform(3, BallNorm::Linf, &mut r, &mut v);
            for j in 0..3 {
                cols[j].push(v[j]);
            }
        }
        for mut c in cols {
            c.sort_by(f64::total_cmp);
            let ks = c
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let f = (x + 1.0) / 2.0;
                    (f - i as f64 / n as f64).abs().max((f - (i + 1) as f64 / n as f64).abs())
                })
                .fold(0.0, f64::max);
            assert!(ks < 0.01, "ks {ks}");
        }
    }

    #[test]
    fn l2_disc_radius_fraction() {
        let mut r = rng(3);
        let n = 200_000;
        let mut v = [0.0; 2];
        let inside = (0..n)
            .filter(|_| {
                ball_uniform(2, BallNorm::L2, &mut r, &mut v);
                assert!(v[0] * v[0] + v[1] * v[1] <= 1.0);
                (v[0] * v[0] + v[1] * v[1]).sqrt() <= 0.5
            })
            .count() as f64
            / n as f64;
        assert!((inside - 0.25).abs() < 3.0 * (0.25f64 * 0.75 / n as f64).sqrt());
    }

    #[test]
    fn noisify_contract() {
        let m = ModelConfig::named("finite_gaussian").build().unwrap();
        let theta = ParameterVector::for_model(&m, vec![1.0]).unwrap();
        let t = simulate(&m, &theta, 100_000, 3).unwrap();

        let zero = noisify(&t, &PerturbationSpec::uniform(0.0), 1).unwrap();
        assert_eq!(zero.observations(), t.observations());
        assert_eq!(zero.meta.noise_epsilon, Some(0.0));

        let eps = 0.5;
        let noisy = noisify(&t, &PerturbationSpec::uniform(eps), 1).unwrap();
        let d: Vec<f64> = noisy.observations().iter().zip(t.observations()).map(|(a, b)| a - b).collect();
        assert!(d.iter().all(|v| v.abs() <= eps));
        let var = sample_sd(&d).powi(2);
        let target = eps * eps / 3.0;
        // Var((εU)²) = ε⁴·4/45
        let se = (eps.powi(4) * 4.0 / 45.0 / d.len() as f64).sqrt();
        assert!((var - target).abs() < 3.0 * se, "{var} vs {target}");

        assert!(matches!(noisify(&noisy, &PerturbationSpec::uniform(eps), 2), Err(Error::Usage(_))));
    }
}
