//! Fisher information of the unperturbed and ε-perturbed models, the
//! information-loss curve `ε ↦ ‖I − I^ε‖_F`, and a windowed check of the
//! conditional missing-information decomposition `I = I^ε + Ē[I^{Y_0:Y_0^ε}]`.
//!
//! `I^ε` is estimated by simulating the perturbed process (`Y + εZ`) and
//! scoring it under the perturbed model. Replicate `r` uses the same `Y` and
//! the same `Z` for every ε, so differences across ε are paired.

use crate::error::{Error, Result};
use crate::model::{FiniteStateModel, Kernel, ParameterVector, PerturbationSpec};
use crate::numeric::{mean, ols_slope, sample_sd};
use crate::oracle::{forward_score_increments, Emission, ForwardFilter};
use crate::rng::{Purpose, StreamKey};
use crate::sampling::{fmt_f64, noisify_with_key, simulate_with_key, Trajectory};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Per-replicate estimator of the information matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FisherEstimator {
    /// `(1/n) Σ_k h_k h_kᵀ` over the score increments `h_k`. Same expectation
    /// as `(1/n) s sᵀ` (the increments are martingale differences), much
    /// smaller variance.
    #[default]
    Increments,
    /// `(1/n) s sᵀ` for the full score `s`.
    ScoreOuterProduct,
}

/// Settings shared by the Fisher estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherConfig {
    /// Trajectory length per replicate.
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default)]
    pub estimator: FisherEstimator,
    /// Score the perturbed model on both `Y + εZ` and `Y − εZ` and average.
    /// This cancels the first-order noise in `I − I^ε` for symmetric kernels.
    #[serde(default = "yes")]
    pub antithetic: bool,
}

fn yes() -> bool {
    true
}

impl FisherConfig {
    pub fn new(n: usize, replicates: usize, seed: u64) -> Self {
        FisherConfig {
            n,
            replicates,
            seed,
            estimator: FisherEstimator::Increments,
            antithetic: true,
        }
    }

    pub fn antithetic(mut self, on: bool) -> Self {
        self.antithetic = on;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("n", "trajectory length must be positive"));
        }
        if self.replicates < 2 {
            return Err(Error::config("replicates", "need at least 2 replicates for standard errors"));
        }
        Ok(())
    }
}

/// Estimate of `I(θ*)` (no ε) or `I^ε(θ*)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherEstimate {
    pub theta: Vec<f64>,
    /// Row-major `d × d`.
    pub matrix: Vec<Vec<f64>>,
    /// Elementwise replicate standard errors.
    pub se_matrix: Vec<Vec<f64>>,
    pub n_used: usize,
    pub replicates: usize,
    pub epsilon: Option<f64>,
    pub kernel: Option<String>,
    pub estimator: FisherEstimator,
}

impl FisherEstimate {
    pub fn to_matrix(&self) -> DMatrix<f64> {
        to_dmatrix(&self.matrix)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.to_matrix().norm()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eig(&self.to_matrix()).0
    }
}

fn to_dmatrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let d = rows.len();
    DMatrix::from_fn(d, d, |i, j| rows[i][j])
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

/// Smallest eigenvalue and its eigenvector.
fn min_eig(m: &DMatrix<f64>) -> (f64, nalgebra::DVector<f64>) {
    let e = m.clone().symmetric_eigen();
    let (i, v) = e
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty matrix");
    (*v, e.eigenvectors.column(i).into_owned())
}

/// Replicate mean and elementwise standard error.
fn mean_and_se(samples: &[DMatrix<f64>]) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = samples[0].nrows();
    let r = samples.len() as f64;
    let mut m = DMatrix::zeros(d, d);
    let mut se = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let xs: Vec<f64> = samples.iter().map(|s| s[(i, j)]).collect();
            m[(i, j)] = mean(&xs);
            se[(i, j)] = sample_sd(&xs) / r.sqrt();
        }
    }
    (m, se)
}

/// Standard error of a scalar functional `f(D̄)` linearised at the mean:
/// the replicate spread of `⟨∇f, D_r⟩`.
fn delta_se(samples: &[DMatrix<f64>], grad: &DMatrix<f64>) -> f64 {
    let proj: Vec<f64> = samples.iter().map(|s| s.dot(grad)).collect();
    sample_sd(&proj) / (samples.len() as f64).sqrt()
}

/// Simulated base trajectory of replicate `r`.
fn replicate_data<M: FiniteStateModel>(model: &M, theta: &ParameterVector, n: usize, seed: u64, r: usize) -> Result<Trajectory> {
    simulate_with_key(model, theta, n, StreamKey::new(seed, Purpose::Simulate).index(r as u64))
}

fn noise_key(seed: u64, r: usize) -> StreamKey {
    StreamKey::new(seed, Purpose::Noise).index(r as u64)
}

/// Per-replicate information matrix of `data` scored under `pert` (or the plain model).
fn replicate_information<M: FiniteStateModel>(
    model: &M,
    theta: &[f64],
    data: &Trajectory,
    pert: Option<&PerturbationSpec>,
    estimator: FisherEstimator,
) -> Result<DMatrix<f64>> {
    let d = model.param_dim();
    let n = data.len() as f64;
    let incs = forward_score_increments(model, theta, data, pert)?;
    let mut out = DMatrix::zeros(d, d);
    match estimator {
        FisherEstimator::Increments => {
            for h in &incs {
                let h = nalgebra::DVector::from_column_slice(h);
                out += &h * h.transpose();
            }
        }
        FisherEstimator::ScoreOuterProduct => {
            let mut s = nalgebra::DVector::zeros(d);
            for h in &incs {
                s += nalgebra::DVector::from_column_slice(h);
            }
            out = &s * s.transpose();
        }
    }
    Ok(out / n)
}

/// Information of replicate `r` under `pert`: the base trajectory scored
/// under the plain model, or `Y ± εZ` scored under the perturbed one.
fn replicate_information_under<M: FiniteStateModel>(
    model: &M,
    theta: &[f64],
    base: &Trajectory,
    pert: Option<&PerturbationSpec>,
    config: &FisherConfig,
    r: usize,
) -> Result<DMatrix<f64>> {
    let p = match pert {
        Some(p) if p.epsilon > 0.0 => p,
        _ => return replicate_information(model, theta, base, None, config.estimator),
    };
    let plus = noisify_with_key(base, p, noise_key(config.seed, r))?;
    let j = replicate_information(model, theta, &plus, Some(p), config.estimator)?;
    if !config.antithetic {
        return Ok(j);
    }
    let minus = reflect(base, &plus)?;
    let j_minus = replicate_information(model, theta, &minus, Some(p), config.estimator)?;
    Ok((j + j_minus) * 0.5)
}

/// `Y − εZ` from `Y` and `Y + εZ`.
fn reflect(base: &Trajectory, plus: &Trajectory) -> Result<Trajectory> {
    let reflected: Vec<f64> = base
        .observations()
        .iter()
        .zip(plus.observations())
        .map(|(y, yp)| y - (yp - y))
        .collect();
    Trajectory::from_parts(reflected, base.obs_dim(), None, plus.meta.clone())
}

/// Estimate `I(θ*)` (`pert = None`) or `I^ε(θ*)`.
pub fn estimate_fisher<M: FiniteStateModel>(
    model: &M,
    theta: &ParameterVector,
    pert: Option<&PerturbationSpec>,
    config: &FisherConfig,
) -> Result<FisherEstimate> {
    config.validate()?;
    if let Some(p) = pert {
        p.validate()?;
    }
    let samples: Vec<DMatrix<f64>> = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let base = replicate_data(model, theta, config.n, config.seed, r)?;
            replicate_information_under(model, theta.values(), &base, pert, config, r)
        })
        .collect::<Result<_>>()?;
    let (m, se) = mean_and_se(&samples);
    Ok(FisherEstimate {
        theta: theta.values().to_vec(),
        matrix: to_rows(&m),
        se_matrix: to_rows(&se),
        n_used: config.n,
        replicates: config.replicates,
        epsilon: pert.map(|p| p.epsilon),
        kernel: pert.map(|p| p.kernel.name().to_string()),
        estimator: config.estimator,
    })
}

/// One row of an information-loss curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub epsilon: f64,
    /// `‖I − I^ε‖_F` of the paired mean difference.
    pub loss: f64,
    pub loss_se: f64,
    /// Smallest eigenvalue of `I − I^ε` (negative only through MC noise).
    pub min_eig: f64,
    pub min_eig_se: f64,
    pub info_eps_norm: f64,
    pub info_eps_norm_se: f64,
    pub info_eps: Vec<Vec<f64>>,
}

impl LossPoint {
    /// Loss within three standard errors of zero.
    pub fn indistinguishable_from_noise(&self) -> bool {
        self.loss < 3.0 * self.loss_se
    }
}

/// `ε ↦ ‖I − I^ε‖_F` with fitted log-log slopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossCurve {
    pub theta: Vec<f64>,
    pub kernel: String,
    pub info: Vec<Vec<f64>>,
    pub info_norm: f64,
    pub info_norm_se: f64,
    pub points: Vec<LossPoint>,
    /// Slope of `log loss` on `log ε` over the smallest four ε (fewer when
    /// fewer are given; absent for a single ε).
    pub slope: Option<f64>,
    pub slope_epsilons: Vec<f64>,
    /// False when some loss in the fit is within 3 SE of zero.
    pub slope_reliable: bool,
    /// Slope of `log ‖I^ε‖` over the largest three ε (at least four ε given).
    pub large_eps_slope: Option<f64>,
    pub config: FisherConfig,
}

pub const LOSS_CURVE_SCHEMA: &str = "loss_curve/1";

impl LossCurve {
    /// CSV `epsilon,loss,loss_se,min_eig,min_eig_se,info_eps_norm,info_eps_norm_se`
    /// plus a JSON sidecar with the slopes and matrices.
    pub fn write(&self, csv_path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(csv_path)?;
        w.write_record([
            "epsilon",
            "loss",
            "loss_se",
            "min_eig",
            "min_eig_se",
            "info_eps_norm",
            "info_eps_norm_se",
        ])?;
        for p in &self.points {
            w.write_record(
                [
                    p.epsilon,
                    p.loss,
                    p.loss_se,
                    p.min_eig,
                    p.min_eig_se,
                    p.info_eps_norm,
                    p.info_eps_norm_se,
                ]
                .map(fmt_f64),
            )?;
        }
        w.flush()?;
        let meta = serde_json::json!({ "schema": LOSS_CURVE_SCHEMA, "curve": self });
        std::fs::write(
            crate::sampling::sidecar_path(csv_path),
            serde_json::to_string_pretty(&meta)? + "\n",
        )?;
        Ok(())
    }
}

/// Paired per-replicate matrices: `J_r` (plain) and `J_r^ε` per ε.
fn paired_samples<M: FiniteStateModel>(
    model: &M,
    theta: &ParameterVector,
    perts: &[PerturbationSpec],
    config: &FisherConfig,
) -> Result<Vec<(DMatrix<f64>, Vec<DMatrix<f64>>)>> {
    (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let base = replicate_data(model, theta, config.n, config.seed, r)?;
            let plain = replicate_information(model, theta.values(), &base, None, config.estimator)?;
            let perturbed = perts
                .iter()
                .map(|p| replicate_information_under(model, theta.values(), &base, Some(p), config, r))
                .collect::<Result<Vec<_>>>()?;
            Ok((plain, perturbed))
        })
        .collect()
}

/// Information-loss curve over `epsilons` (ascending) for noise `kernel`.
pub fn information_loss_curve<M: FiniteStateModel>(
    model: &M,
    theta: &ParameterVector,
    epsilons: &[f64],
    kernel: &Kernel,
    config: &FisherConfig,
) -> Result<LossCurve> {
    config.validate()?;
    if epsilons.is_empty() {
        return Err(Error::config("epsilons", "need at least one epsilon"));
    }
    if epsilons.windows(2).any(|w| w[0] >= w[1]) || epsilons[0] <= 0.0 {
        return Err(Error::config("epsilons", "must be positive and strictly ascending"));
    }
    let perts: Vec<PerturbationSpec> = epsilons
        .iter()
        .map(|&e| PerturbationSpec {
            epsilon: e,
            kernel: kernel.clone(),
            norm: Default::default(),
        })
        .collect();
    let samples = paired_samples(model, theta, &perts, config)?;
    let plain: Vec<DMatrix<f64>> = samples.iter().map(|s| s.0.clone()).collect();
    let (info, _) = mean_and_se(&plain);
    let info_norm = info.norm();
    let info_norm_se = delta_se(&plain, &(&info / info_norm));

    let points: Vec<LossPoint> = epsilons
        .iter()
        .enumerate()
        .map(|(e, &eps)| {
            let diffs: Vec<DMatrix<f64>> = samples.iter().map(|(p, q)| p - &q[e]).collect();
            let pert: Vec<DMatrix<f64>> = samples.iter().map(|(_, q)| q[e].clone()).collect();
            let (dbar, _) = mean_and_se(&diffs);
            let (ibar, _) = mean_and_se(&pert);
            let loss = dbar.norm();
            let loss_se = if loss > 0.0 { delta_se(&diffs, &(&dbar / loss)) } else { 0.0 };
            let (min_eig, v) = min_eig(&dbar);
            let min_eig_se = delta_se(&diffs, &(&v * v.transpose()));
            let ie_norm = ibar.norm();
            let ie_se = if ie_norm > 0.0 { delta_se(&pert, &(&ibar / ie_norm)) } else { 0.0 };
            LossPoint {
                epsilon: eps,
                loss,
                loss_se,
                min_eig,
                min_eig_se,
                info_eps_norm: ie_norm,
                info_eps_norm_se: ie_se,
                info_eps: to_rows(&ibar),
            }
        })
        .collect();

    let fit: Vec<&LossPoint> = points.iter().take(4).collect();
    let slope = (fit.len() >= 2 && fit.iter().all(|p| p.loss > 0.0)).then(|| {
        let x: Vec<f64> = fit.iter().map(|p| p.epsilon.ln()).collect();
        let y: Vec<f64> = fit.iter().map(|p| p.loss.ln()).collect();
        ols_slope(&x, &y)
    });
    let large_eps_slope = (points.len() >= 4).then(|| {
        let tail = &points[points.len() - 3..];
        let x: Vec<f64> = tail.iter().map(|p| p.epsilon.ln()).collect();
        let y: Vec<f64> = tail.iter().map(|p| p.info_eps_norm.ln()).collect();
        ols_slope(&x, &y)
    });
    Ok(LossCurve {
        theta: theta.values().to_vec(),
        kernel: kernel.name().to_string(),
        info: to_rows(&info),
        info_norm,
        info_norm_se,
        slope_epsilons: fit.iter().map(|p| p.epsilon).collect(),
        slope_reliable: slope.is_some() && fit.iter().all(|p| !p.indistinguishable_from_noise()),
        slope,
        points,
        large_eps_slope,
        config: *config,
    })
}

/// Window layout and sample sizes for [`missing_information_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MissingInfoConfig {
    /// Unperturbed observations before the target `Y_0`.
    pub past: usize,
    /// Perturbed observations after it.
    pub future: usize,
    /// Monte Carlo windows for the conditional term.
    pub windows: usize,
    /// Settings of the paired long-trajectory estimate of `I − I^ε`.
    pub direct: FisherConfig,
    pub seed: u64,
}

/// Both sides of `I − I^ε = Ē[I^{Y_0:Y_0^ε}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingInfoReport {
    pub epsilon: f64,
    pub theta: Vec<f64>,
    /// Windowed Monte Carlo estimate of the expected conditional missing information.
    pub missing: Vec<Vec<f64>>,
    pub missing_se: Vec<Vec<f64>>,
    /// Paired long-trajectory estimate of `I − I^ε`.
    pub direct: Vec<Vec<f64>>,
    pub direct_se: Vec<Vec<f64>>,
    /// `missing − direct`.
    pub discrepancy: Vec<Vec<f64>>,
    /// `sqrt(se_missing² + se_direct²)`.
    pub combined_se: Vec<Vec<f64>>,
    /// Long-trajectory `I` for scale.
    pub info: Vec<Vec<f64>>,
    pub info_norm: f64,
    /// Second-largest eigenvalue modulus of the transition matrix raised to
    /// the shorter window side: a proxy for the truncation error.
    pub truncation: f64,
    pub config: MissingInfoConfig,
}

impl MissingInfoReport {
    /// Largest `|discrepancy| / combined_se` over the entries.
    pub fn max_z(&self) -> f64 {
        let mut z: f64 = 0.0;
        for (dr, sr) in self.discrepancy.iter().zip(&self.combined_se) {
            for (d, s) in dr.iter().zip(sr) {
                z = z.max(if *s > 0.0 { d.abs() / s } else if *d == 0.0 { 0.0 } else { f64::INFINITY });
            }
        }
        z
    }

    pub fn agrees(&self, z: f64) -> bool {
        self.max_z() <= z
    }
}

/// Conditional scores of `Y_0` and `Y_0^ε` given the windowed past and
/// perturbed future, via three forward passes over the window.
fn window_scores<M: FiniteStateModel>(
    model: &M,
    theta: &[f64],
    plain: &Trajectory,
    noisy: &Trajectory,
    past: usize,
    pert: &PerturbationSpec,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let score = |target: Emission, target_row: &[f64]| -> Result<Vec<f64>> {
        let mut f = ForwardFilter::new(model, theta, true);
        let mut total = vec![0.0; model.param_dim()];
        for k in 0..plain.len() {
            let (y, em) = match k.cmp(&past) {
                std::cmp::Ordering::Less => (plain.row(k), Emission::Plain),
                std::cmp::Ordering::Equal => (target_row, target),
                std::cmp::Ordering::Greater => (noisy.row(k), Emission::Perturbed(pert)),
            };
            let h = f
                .step(y, em)?
                .score_increment
                .ok_or_else(|| Error::Domain("zero window likelihood".into()))?;
            for (t, v) in total.iter_mut().zip(h) {
                *t += v;
            }
        }
        Ok(total)
    };
    let marginal = score(Emission::Missing, plain.row(past))?;
    let with_y = score(Emission::Plain, plain.row(past))?;
    let with_noisy = score(Emission::Perturbed(pert), noisy.row(past))?;
    let diff = |a: Vec<f64>| a.iter().zip(&marginal).map(|(x, m)| x - m).collect();
    Ok((diff(with_y), diff(with_noisy)))
}

/// Estimate both sides of the missing-information decomposition at `pert.epsilon`.
pub fn missing_information_check<M: FiniteStateModel>(
    model: &M,
    theta: &ParameterVector,
    pert: &PerturbationSpec,
    config: &MissingInfoConfig,
) -> Result<MissingInfoReport> {
    pert.validate()?;
    if pert.epsilon <= 0.0 {
        return Err(Error::config("epsilon", "missing-information check needs epsilon > 0"));
    }
    if model.obs_dim() != 1 {
        return Err(Error::Unsupported("missing-information check needs scalar observations".into()));
    }
    if config.windows < 2 {
        return Err(Error::config("windows", "need at least 2 windows"));
    }
    let d = model.param_dim();
    let len = config.past + 1 + config.future;

    let samples: Vec<DMatrix<f64>> = (0..config.windows)
        .into_par_iter()
        .map(|i| {
            let key = StreamKey::new(config.seed, Purpose::Window).index(i as u64);
            let plain = simulate_with_key(model, theta, len, key)?;
            let noisy = noisify_with_key(&plain, pert, key.step(1))?;
            let term = |noisy: &Trajectory| -> Result<DMatrix<f64>> {
                let (s, se) = window_scores(model, theta.values(), &plain, noisy, config.past, pert)?;
                let s = nalgebra::DVector::from_vec(s);
                let se = nalgebra::DVector::from_vec(se);
                Ok(&s * s.transpose() - &se * se.transpose())
            };
            let plus = term(&noisy)?;
            if !config.direct.antithetic {
                return Ok(plus);
            }
            let minus = term(&reflect(&plain, &noisy)?)?;
            Ok((plus + minus) * 0.5)
        })
        .collect::<Result<_>>()?;
    let (missing, missing_se) = mean_and_se(&samples);

    let paired = paired_samples(model, theta, std::slice::from_ref(pert), &config.direct)?;
    let diffs: Vec<DMatrix<f64>> = paired.iter().map(|(p, q)| p - &q[0]).collect();
    let plain: Vec<DMatrix<f64>> = paired.iter().map(|(p, _)| p.clone()).collect();
    let (direct, direct_se) = mean_and_se(&diffs);
    let (info, _) = mean_and_se(&plain);

    let combined = DMatrix::from_fn(d, d, |i, j| missing_se[(i, j)].hypot(direct_se[(i, j)]));
    let q = model.transition_matrix(theta.values());
    let mut moduli: Vec<f64> = q.complex_eigenvalues().iter().map(|c| c.norm()).collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    let lambda2 = moduli.get(1).copied().unwrap_or(0.0);

    Ok(MissingInfoReport {
        epsilon: pert.epsilon,
        theta: theta.values().to_vec(),
        discrepancy: to_rows(&(&missing - &direct)),
        missing: to_rows(&missing),
        missing_se: to_rows(&missing_se),
        direct: to_rows(&direct),
        direct_se: to_rows(&direct_se),
        combined_se: to_rows(&combined),
        info_norm: info.norm(),
        info: to_rows(&info),
        truncation: lambda2.powi(config.past.min(config.future) as i32),
        config: *config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BuiltinModel;
    use serde_json::json;

    #[test]
    fn gaussian_location_information() {
        let m = BuiltinModel::from_name(
            "finite_gaussian",
            &json!({"k": 1, "centers": [0.0], "sd": 2.0, "parameterization": "location"}),
        )
        .unwrap();
        let theta = ParameterVector::for_model(&m, vec![0.5]).unwrap();
        let est = estimate_fisher(&m, &theta, None, &FisherConfig::new(500, 20, 3)).unwrap();
        let se = est.se_matrix[0][0];
        assert!((est.matrix[0][0] - 0.25).abs() < 3.0 * se, "{} ± {se}", est.matrix[0][0]);
    }

    #[test]
    fn single_epsilon_curve_has_no_slope() {
        let m = BuiltinModel::from_name("finite_gaussian", &json!({})).unwrap();
        let theta = ParameterVector::for_model(&m, vec![1.0]).unwrap();
        let c = information_loss_curve(&m, &theta, &[0.3], &Kernel::UniformBall, &FisherConfig::new(50, 4, 1)).unwrap();
        assert_eq!(c.points.len(), 1);
        assert!(c.slope.is_none());
        let dir = tempfile::tempdir().unwrap();
        c.write(&dir.path().join("loss.csv")).unwrap();
        assert!(dir.path().join("loss.json").exists());
    }

    #[test]
    fn estimates_are_symmetric() {
        let m = BuiltinModel::from_name("finite_gaussian", &json!({"parameterization": "location_scale"})).unwrap();
        let theta = ParameterVector::for_model(&m, vec![1.0, 0.2]).unwrap();
        let pert = PerturbationSpec::uniform(0.4);
        let est = estimate_fisher(&m, &theta, Some(&pert), &FisherConfig::new(100, 4, 2)).unwrap();
        assert_eq!(est.matrix[0][1], est.matrix[1][0]);
        assert!(est.min_eigenvalue() > -1e-8);
    }
}
