//! Sequential Monte Carlo estimate of the ABC likelihood `p^ε(Ŷ_1, …, Ŷ_n)`.
//!
//! Per time step: propagate every particle through the hidden dynamics, draw
//! a pseudo-observation, weight it by the ABC kernel (ball indicator or
//! `φ((Ŷ_k − ỹ)/ε)`), record the average weight, and resample. The product
//! of the averages (accumulated in the log domain) is the estimate.
//!
//! Randomness is keyed per (step, chunk of particles), so results are
//! bit-identical for any thread count.

use crate::error::{Error, Result};
use crate::model::{HiddenMarkovModel, PerturbationSpec};
use crate::rng::{Purpose, SimRng, StreamKey};
use crate::sampling::Trajectory;
use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const CHUNK: usize = 256;

/// When and how particles are resampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy")]
pub enum Resampling {
    /// Multinomial resampling at every step.
    MultinomialAlways,
    /// Systematic resampling whenever `ESS < threshold · N`. A threshold of 0
    /// never resamples (pure sequential importance sampling).
    SystematicEss { threshold: f64 },
}

impl Default for Resampling {
    fn default() -> Self {
        Resampling::MultinomialAlways
    }
}

impl Resampling {
    /// Parse `multinomial` or `systematic[:threshold]`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut parts = s.splitn(2, ':');
        match parts.next().unwrap_or_default() {
            "multinomial" => Ok(Resampling::MultinomialAlways),
            "systematic" => {
                let threshold = match parts.next() {
                    Some(t) => t
                        .parse::<f64>()
                        .map_err(|_| Error::config("resampling", format!("bad ESS threshold `{t}`")))?,
                    None => 0.5,
                };
                if !(0.0..=1.0).contains(&threshold) {
                    return Err(Error::config("resampling", "ESS threshold must lie in [0, 1]"));
                }
                Ok(Resampling::SystematicEss { threshold })
            }
            other => Err(Error::config("resampling", format!("unknown policy `{other}`"))),
        }
    }
}

/// Resampling scheme for a single resampling event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResampleScheme {
    Multinomial,
    Systematic,
}

/// Settings of one likelihood evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmcConfig {
    pub num_particles: usize,
    pub resampling: Resampling,
    pub seed: u64,
    /// Separates independent replicates under the same seed.
    #[serde(default)]
    pub stream: u64,
}

impl SmcConfig {
    pub fn new(num_particles: usize, seed: u64) -> Self {
        SmcConfig {
            num_particles,
            resampling: Resampling::MultinomialAlways,
            seed,
            stream: 0,
        }
    }

    pub fn resampling(mut self, resampling: Resampling) -> Self {
        self.resampling = resampling;
        self
    }

    pub fn stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }
}

/// Particles and pseudo-observations at one step.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble<S> {
    pub states: Vec<S>,
    /// Row-major `N × m` pseudo-observations `ỹ_k^l`.
    pub pseudo_obs: Vec<f64>,
    /// Unnormalised weights `w̃_k^l`.
    pub raw_weights: Vec<f64>,
    pub step: usize,
}

impl<S: Clone> ParticleEnsemble<S> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn normalized_weights(&self) -> Option<Vec<f64>> {
        let total: f64 = self.raw_weights.iter().sum();
        (total > 0.0).then(|| self.raw_weights.iter().map(|w| w / total).collect())
    }

    pub fn ess(&self) -> f64 {
        effective_sample_size(&self.raw_weights)
    }
}

/// `(Σw)² / Σw²`; zero when every weight is zero.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    if s2 > 0.0 {
        s * s / s2
    } else {
        0.0
    }
}

/// Draw `n_out` ancestor indices proportionally to `weights`. `None` when
/// every weight is zero.
pub fn resample_indices(weights: &[f64], n_out: usize, scheme: ResampleScheme, rng: &mut SimRng) -> Option<Vec<usize>> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    // ordered positions in [0, total)
    let positions: Vec<f64> = match scheme {
        ResampleScheme::Systematic => {
            let u: f64 = rng.random();
            (0..n_out).map(|i| (i as f64 + u) / n_out as f64 * total).collect()
        }
        ResampleScheme::Multinomial => {
            // sorted uniforms from normalised exponential spacings
            let mut acc = 0.0;
            let mut cum: Vec<f64> = (0..n_out)
                .map(|_| {
                    acc += rng.sample::<f64, _>(Exp1);
                    acc
                })
                .collect();
            let end = acc + rng.sample::<f64, _>(Exp1);
            for c in &mut cum {
                *c = *c / end * total;
            }
            cum
        }
    };
    let mut out = Vec::with_capacity(n_out);
    let mut j = 0;
    let mut edge = weights[0];
    let last_positive = weights.iter().rposition(|&w| w > 0.0)?;
    for p in positions {
        while p >= edge && j < last_positive {
            j += 1;
            edge += weights[j];
        }
        out.push(j);
    }
    Some(out)
}

/// Resample an ensemble to the same size; the result carries uniform weights.
pub fn resample<S: Clone>(ens: &ParticleEnsemble<S>, scheme: ResampleScheme, rng: &mut SimRng) -> Option<ParticleEnsemble<S>> {
    let n = ens.len();
    let m = if n == 0 { 0 } else { ens.pseudo_obs.len() / n };
    let idx = resample_indices(&ens.raw_weights, n, scheme, rng)?;
    Some(ParticleEnsemble {
        states: idx.iter().map(|&i| ens.states[i].clone()).collect(),
        pseudo_obs: idx
            .iter()
            .flat_map(|&i| ens.pseudo_obs[i * m..(i + 1) * m].iter().copied())
            .collect(),
        raw_weights: vec![1.0; n],
        step: ens.step,
    })
}

/// Output of [`smc_abc_likelihood`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodEstimate {
    /// `log p̂^ε(Ŷ_1..Ŷ_n)`, −∞ on collapse.
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub log_value: f64,
    /// Per-step `Σ_l W̄_{k−1}^l w̃_k^l`, the average weight when the previous
    /// step was resampled. Truncated after a collapse.
    pub step_acceptance: Vec<f64>,
    /// First step (1-based) at which every weight was zero.
    pub collapsed_at: Option<usize>,
    /// ESS after weighting, per non-collapsed step.
    pub ess_trace: Vec<f64>,
    /// Delta-method standard-error proxy for `log_value`.
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub log_se_proxy: f64,
    pub n: usize,
    pub num_particles: usize,
    pub epsilon: f64,
    pub kernel: String,
    pub seed: u64,
    pub stream: u64,
}

impl LikelihoodEstimate {
    pub fn is_collapsed(&self) -> bool {
        self.collapsed_at.is_some()
    }
}

/// Estimate the ABC likelihood of `data` under `model` at `theta`.
pub fn smc_abc_likelihood<M: HiddenMarkovModel>(
    model: &M,
    theta: &[f64],
    data: &Trajectory,
    pert: &PerturbationSpec,
    config: &SmcConfig,
) -> Result<LikelihoodEstimate> {
    smc_abc_likelihood_observed(model, theta, data, pert, config, |_| {})
}

/// [`smc_abc_likelihood`], calling `observe` with the weighted ensemble at
/// every step (before resampling).
pub fn smc_abc_likelihood_observed<M, F>(
    model: &M,
    theta: &[f64],
    data: &Trajectory,
    pert: &PerturbationSpec,
    config: &SmcConfig,
    mut observe: F,
) -> Result<LikelihoodEstimate>
where
    M: HiddenMarkovModel,
    F: FnMut(&ParticleEnsemble<M::State>),
{
    let n_particles = config.num_particles;
    if n_particles < 2 {
        return Err(Error::config("num_particles", "need at least 2 particles"));
    }
    if data.obs_dim() != model.obs_dim() {
        return Err(Error::Domain(format!(
            "data has {}-dimensional observations, model `{}` has {}",
            data.obs_dim(),
            model.name(),
            model.obs_dim()
        )));
    }
    if !model.parameter_box().contains(theta) {
        return Err(Error::Domain(format!("theta {theta:?} is outside the parameter box")));
    }
    pert.validate()?;
    if pert.epsilon <= 0.0 {
        return Err(Error::config("epsilon", "ABC likelihood requires epsilon > 0"));
    }

    let m = model.obs_dim();
    let n = data.len();
    let log_n = (n_particles as f64).ln();
    let base = StreamKey::new(config.seed, Purpose::Propagate).index(config.stream);
    let resample_base = StreamKey::new(config.seed, Purpose::Resample).index(config.stream);

    let mut states: Vec<Option<M::State>> = vec![None; n_particles];
    let mut prev_logw = vec![-log_n; n_particles];
    let mut pseudo = vec![0.0; n_particles * m];
    let mut log_w = vec![0.0; n_particles];

    let mut est = LikelihoodEstimate {
        log_value: 0.0,
        step_acceptance: Vec::with_capacity(n),
        collapsed_at: None,
        ess_trace: Vec::with_capacity(n),
        log_se_proxy: 0.0,
        n,
        num_particles: n_particles,
        epsilon: pert.epsilon,
        kernel: pert.kernel.name().to_string(),
        seed: config.seed,
        stream: config.stream,
    };
    let mut rel_var = 0.0;

    for k in 0..n {
        let y_obs = data.row(k);
        let step_key = base.step(k as u64 + 1);
        states
            .par_chunks_mut(CHUNK)
            .zip(pseudo.par_chunks_mut(CHUNK * m))
            .zip(log_w.par_chunks_mut(CHUNK))
            .enumerate()
            .for_each(|(c, ((xs, ys), ws))| {
                let mut rng = step_key.lane(c as u64).rng();
                for ((x, y), w) in xs.iter_mut().zip(ys.chunks_mut(m)).zip(ws.iter_mut()) {
                    let prev = match x.take() {
                        Some(s) => s,
                        None => model.sample_initial(theta, &mut rng),
                    };
                    let next = model.sample_transition(theta, &prev, &mut rng);
                    model.sample_observation(theta, &next, &mut rng, y);
                    *w = pert.log_weight(y_obs, y);
                    *x = Some(next);
                }
            });

        // combined weights W̄_{k−1} · w̃_k, max-subtracted
        let combined: Vec<f64> = prev_logw.iter().zip(&log_w).map(|(a, b)| a + b).collect();
        let max = combined.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = log_w.iter().map(|lw| lw.exp()).collect();
        if max == f64::NEG_INFINITY {
            est.step_acceptance.push(0.0);
            est.collapsed_at = Some(k + 1);
            est.log_value = f64::NEG_INFINITY;
            est.log_se_proxy = f64::INFINITY;
            observe(&ensemble(&states, &pseudo, raw, k + 1));
            return Ok(est);
        }
        let scaled: Vec<f64> = combined.iter().map(|c| (c - max).exp()).collect();
        let sum: f64 = scaled.iter().sum();
        let log_acc = max + sum.ln();
        est.log_value += log_acc;
        est.step_acceptance.push(log_acc.exp());
        est.ess_trace.push(effective_sample_size(&scaled));

        // Var(Σ W̄ w̃) ≈ Σ W̄² (w̃ − p̂)², relative to p̂²
        let p_hat = log_acc.exp();
        if p_hat > 0.0 {
            let v: f64 = prev_logw
                .iter()
                .zip(&raw)
                .map(|(lp, w)| (2.0 * lp).exp() * (w - p_hat).powi(2))
                .sum();
            rel_var += v / (p_hat * p_hat);
        }

        let ens = ensemble(&states, &pseudo, raw, k + 1);
        observe(&ens);

        let scheme = match config.resampling {
            Resampling::MultinomialAlways => Some(ResampleScheme::Multinomial),
            Resampling::SystematicEss { threshold } => {
                let ess = *est.ess_trace.last().expect("pushed above");
                (ess < threshold * n_particles as f64).then_some(ResampleScheme::Systematic)
            }
        };
        match scheme {
            Some(scheme) => {
                let mut rng = resample_base.step(k as u64 + 1).rng();
                let idx = resample_indices(&scaled, n_particles, scheme, &mut rng)
                    .expect("at least one positive weight");
                states = idx.iter().map(|&i| states[i].clone()).collect();
                prev_logw.iter_mut().for_each(|w| *w = -log_n);
            }
            None => {
                for (p, c) in prev_logw.iter_mut().zip(&combined) {
                    *p = c - log_acc;
                }
            }
        }
    }
    est.log_se_proxy = rel_var.sqrt();
    Ok(est)
}

fn ensemble<S: Clone>(states: &[Option<S>], pseudo: &[f64], raw: Vec<f64>, step: usize) -> ParticleEnsemble<S> {
    ParticleEnsemble {
        states: states.iter().map(|s| s.clone().expect("propagated")).collect(),
        pseudo_obs: pseudo.to_vec(),
        raw_weights: raw,
        step,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;

    fn rng(i: u64) -> SimRng {
        StreamKey::new(77, Purpose::Test).index(i).rng()
    }

    #[test]
    fn single_positive_weight_copies_that_particle() {
        let w = [0.0, 0.0, 3.0, 0.0];
        for scheme in [ResampleScheme::Multinomial, ResampleScheme::Systematic] {
            let idx = resample_indices(&w, 10, scheme, &mut rng(1)).unwrap();
            assert!(idx.iter().all(|&i| i == 2));
        }
    }

    #[test]
    fn zero_weights_signal_collapse() {
        assert!(resample_indices(&[0.0, 0.0], 2, ResampleScheme::Multinomial, &mut rng(2)).is_none());
    }

    #[test]
    fn systematic_half_half_gives_two_copies_each() {
        // positions (i + u)/4 for any u ∈ [0, 1): two fall below 0.5, two above
        for i in 0..50 {
            let mut idx = resample_indices(&[0.5, 0.5], 4, ResampleScheme::Systematic, &mut rng(i)).unwrap();
            idx.sort();
            assert_eq!(idx, vec![0, 0, 1, 1]);
        }
    }

    #[test]
    fn multinomial_equal_weights_uniform_counts() {
        // chi-square over 20 categories, 2000 resamples of size 20
        let n = 20;
        let reps = 2000;
        let mut counts = vec![0usize; n];
        let mut r = rng(3);
        for _ in 0..reps {
            for i in resample_indices(&vec![1.0; n], n, ResampleScheme::Multinomial, &mut r).unwrap() {
                counts[i] += 1;
            }
        }
        let expected = reps as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 19 dof: P(χ² > 43.82) = 0.001
        assert!(chi2 < 43.82, "chi2 {chi2}");
    }

    #[test]
    fn resampled_ensemble_has_uniform_weights() {
        let ens = ParticleEnsemble {
            states: vec![0usize, 1, 2],
            pseudo_obs: vec![0.1, 0.2, 0.3],
            raw_weights: vec![0.0, 1.0, 1.0],
            step: 1,
        };
        let r = resample(&ens, ResampleScheme::Multinomial, &mut rng(4)).unwrap();
        assert_eq!(r.raw_weights, vec![1.0; 3]);
        assert!(r.states.iter().all(|&s| s != 0));
        for (s, y) in r.states.iter().zip(&r.pseudo_obs) {
            assert_eq!(*y, ens.pseudo_obs[*s]);
        }
    }

    #[test]
    fn parse_policies() {
        assert_eq!(Resampling::parse("multinomial").unwrap(), Resampling::MultinomialAlways);
        assert_eq!(
            Resampling::parse("systematic:0.25").unwrap(),
            Resampling::SystematicEss { threshold: 0.25 }
        );
        assert!(Resampling::parse("systematic:2").is_err());
        assert!(Resampling::parse("stratified").is_err());
    }
}
