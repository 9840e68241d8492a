//! Experiment presets: ε-sweeps of estimator bias, information-loss curves,
//! noisy-ABC consistency in n, the i.i.d. `±θ` pathology, and custom
//! estimation studies. Every run writes into a fresh `run-NNN` directory
//! with a copy of the resolved configuration and a manifest of content
//! hashes.

use crate::error::{Error, Result};
use crate::estimate::{estimate, exact_mle, noise_key, Backend, Method, Optimizer};
use crate::fisher::{estimate_fisher, information_loss_curve, FisherConfig, LossCurve};
use crate::model::{BuiltinModel, HiddenMarkovModel, Kernel, ModelConfig, ParameterVector, PerturbationSpec};
use crate::numeric::{mean, median, ols_slope, std_error};
use crate::oracle::{iid_abc_likelihood, ExactLikelihood};
use crate::rng::{Purpose, StreamKey};
use crate::sampling::{fmt_f64, noisify_with_key, simulate_with_key, Trajectory};
use crate::smc::Resampling;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// Which preset to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    BiasCurve,
    InfoLossCurve,
    Consistency,
    #[serde(rename = "example_3_2")]
    Example32,
    Custom,
}

impl ExperimentKind {
    pub const NAMES: [&'static str; 5] = ["bias_curve", "info_loss_curve", "consistency", "example_3_2", "custom"];

    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.into()))
            .map_err(|_| Error::config("experiment", format!("unknown preset `{s}` (expected one of {:?})", Self::NAMES)))
    }

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::BiasCurve => "bias_curve",
            ExperimentKind::InfoLossCurve => "info_loss_curve",
            ExperimentKind::Consistency => "consistency",
            ExperimentKind::Example32 => "example_3_2",
            ExperimentKind::Custom => "custom",
        }
    }
}

/// Likelihood backend of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Oracle,
    Smc,
}

/// Full description of an experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub model: ModelConfig,
    pub theta_star: Vec<f64>,
    /// Ascending ε values (the single value of `consistency` and `example_3_2`
    /// is the first entry).
    pub epsilons: Vec<f64>,
    pub n: usize,
    /// Trajectory lengths swept by `consistency`.
    #[serde(default)]
    pub n_values: Vec<usize>,
    pub replicates: usize,
    /// Mandatory; there is no clock-based default.
    pub seed: u64,
    pub method: Method,
    pub backend: BackendKind,
    /// Particles for the SMC backend.
    pub num_particles: usize,
    #[serde(default)]
    pub resampling: Resampling,
    #[serde(default = "uniform_kernel")]
    pub kernel: String,
    /// Optimizer; the default depends on the parameter dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<Optimizer>,
    pub output_dir: PathBuf,
    /// Also write a gnuplot script next to the CSV.
    #[serde(default)]
    pub plot: bool,
}

fn uniform_kernel() -> String {
    "uniform".into()
}

impl ExperimentConfig {
    /// Preset defaults for `kind`.
    pub fn preset(kind: ExperimentKind, seed: u64, output_dir: impl Into<PathBuf>) -> Self {
        let fg = |hyper: serde_json::Value, bounds: Option<Vec<[f64; 2]>>| ModelConfig {
            model: "finite_gaussian".into(),
            hyper,
            theta_box: bounds,
        };
        let base = ExperimentConfig {
            experiment: kind,
            model: fg(serde_json::json!({"parameterization": "mean_scale"}), None),
            theta_star: vec![1.0],
            epsilons: vec![0.5],
            n: 2000,
            n_values: Vec::new(),
            replicates: 20,
            seed,
            method: Method::Abc,
            backend: BackendKind::Oracle,
            num_particles: 1000,
            resampling: Resampling::MultinomialAlways,
            kernel: uniform_kernel(),
            optimizer: None,
            output_dir: output_dir.into(),
            plot: false,
        };
        match kind {
            ExperimentKind::BiasCurve => ExperimentConfig {
                model: fg(serde_json::json!({"parameterization": "sd"}), Some(vec![[0.5, 2.0]])),
                epsilons: vec![0.05, 0.1, 0.2, 0.4, 0.8],
                optimizer: Some(Optimizer::GridThenGolden { step: 0.01, tol: 1e-7 }),
                ..base
            },
            ExperimentKind::InfoLossCurve => ExperimentConfig {
                model: fg(serde_json::json!({"parameterization": "location_scale"}), None),
                theta_star: vec![1.0, 0.0],
                epsilons: vec![0.05, 0.1, 0.2, 0.4, 1.0, 3.0, 10.0, 30.0, 100.0],
                replicates: 100,
                ..base
            },
            ExperimentKind::Consistency => ExperimentConfig {
                method: Method::NoisyAbc,
                n_values: vec![500, 2000, 8000],
                optimizer: Some(Optimizer::GridThenGolden { step: 0.02, tol: 1e-6 }),
                ..base
            },
            ExperimentKind::Example32 => ExperimentConfig {
                model: ModelConfig::named("iid_pm_theta"),
                epsilons: vec![1.5],
                n: 100,
                replicates: 1,
                optimizer: Some(Optimizer::Grid { step: 0.01 }),
                ..base
            },
            ExperimentKind::Custom => base,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() {
            return Err(Error::config("epsilons", "need at least one epsilon"));
        }
        if self.epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::config("epsilons", "every epsilon must be positive and finite"));
        }
        if self.epsilons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("epsilons", "must be strictly ascending"));
        }
        if self.n == 0 {
            return Err(Error::config("n", "must be positive"));
        }
        if self.replicates == 0 {
            return Err(Error::config("replicates", "must be positive"));
        }
        if self.experiment == ExperimentKind::Consistency && self.n_values.is_empty() {
            return Err(Error::config("n_values", "consistency needs a list of trajectory lengths"));
        }
        if self.backend == BackendKind::Smc && self.num_particles < 2 {
            return Err(Error::config("num_particles", "need at least 2 particles"));
        }
        let model = self.build_model()?;
        ParameterVector::for_model(&model, self.theta_star.clone())
            .map_err(|e| Error::config("theta_star", e.to_string()))?;
        Kernel::parse(&self.kernel)?;
        Ok(())
    }

    pub fn build_model(&self) -> Result<BuiltinModel> {
        self.model.build()
    }

    fn backend(&self) -> Backend {
        match self.backend {
            BackendKind::Oracle => Backend::Oracle,
            BackendKind::Smc => Backend::Smc {
                num_particles: self.num_particles,
                resampling: self.resampling,
            },
        }
    }

    fn perturbation(&self, epsilon: f64) -> Result<PerturbationSpec> {
        Ok(PerturbationSpec {
            epsilon,
            kernel: Kernel::parse(&self.kernel)?,
            norm: Default::default(),
        })
    }

    fn optimizer_for(&self, model: &BuiltinModel) -> Optimizer {
        self.optimizer
            .clone()
            .unwrap_or_else(|| Optimizer::default_for(&model.parameter_box()))
    }
}

/// Data of replicate `r`; `variant` separates independent data sets (e.g.
/// different trajectory lengths) under one seed.
fn replicate_data(model: &BuiltinModel, theta: &ParameterVector, n: usize, seed: u64, r: usize, variant: u64) -> Result<Trajectory> {
    simulate_with_key(model, theta, n, StreamKey::new(seed, Purpose::Simulate).index(r as u64).step(variant))
}

fn replicate_seed(seed: u64, r: usize) -> u64 {
    StreamKey::new(seed, Purpose::Replicate).index(r as u64).derive_seed()
}

/// Per-ε aggregate of a bias curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasPoint {
    pub epsilon: f64,
    /// Per coordinate: mean `|θ̂^ε − θ̂_MLE|` over replicates (mean `|θ̂^ε − θ*|`
    /// when the model has no exact likelihood).
    pub bias: Vec<f64>,
    pub bias_se: Vec<f64>,
    /// Per coordinate: mean `|θ̂^ε − θ*|`.
    pub abs_error: Vec<f64>,
    pub abs_error_se: Vec<f64>,
    pub replicates_used: usize,
    pub failures: usize,
}

/// Output of [`bias_curve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasCurve {
    pub theta_star: Vec<f64>,
    pub method: Method,
    /// Whether `bias` is measured against the exact MLE on the same data.
    pub baseline_is_mle: bool,
    pub points: Vec<BiasPoint>,
    /// Per coordinate: log-log slope of `bias` over the smallest four ε.
    pub slope: Vec<Option<f64>>,
    /// Mean `|θ̂_MLE − θ*|` per coordinate.
    pub mle_abs_error: Option<Vec<f64>>,
    /// `3/√(n I_jj)` per coordinate, from a numerical Fisher information.
    pub mle_band: Option<Vec<f64>>,
    /// Raw estimates: `estimates[e][r]` (None on failure).
    pub estimates: Vec<Vec<Option<Vec<f64>>>>,
}

fn coordinate_stats(values: &[Vec<f64>], d: usize) -> (Vec<f64>, Vec<f64>) {
    (0..d)
        .map(|j| {
            let xs: Vec<f64> = values.iter().map(|v| v[j]).collect();
            if xs.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                (mean(&xs), std_error(&xs))
            }
        })
        .unzip()
}

/// Sweep ε: simulate at θ*, estimate, and aggregate the bias per coordinate.
pub fn bias_curve(config: &ExperimentConfig) -> Result<BiasCurve> {
    config.validate()?;
    let model = config.build_model()?;
    let theta = ParameterVector::for_model(&model, config.theta_star.clone())?;
    let optimizer = config.optimizer_for(&model);
    let backend = config.backend();
    let perts = config
        .epsilons
        .iter()
        .map(|&e| config.perturbation(e))
        .collect::<Result<Vec<_>>>()?;
    let d = model.param_dim();

    type Row = (Option<Vec<f64>>, Vec<Option<Vec<f64>>>);
    let rows: Vec<Row> = (0..config.replicates)
        .into_par_iter()
        .map(|r| -> Result<Row> {
            let data = replicate_data(&model, &theta, config.n, config.seed, r, 0)?;
            let mle = match exact_mle(&model, &data, &optimizer) {
                Ok(m) => Some(m.theta_hat),
                Err(Error::Unsupported(_)) => None,
                Err(e) => return Err(e),
            };
            let seed = replicate_seed(config.seed, r);
            let ests = perts
                .iter()
                .map(|p| match estimate(config.method, &model, &data, p, &backend, &optimizer, seed) {
                    Ok(est) => Ok(Some(est.theta_hat)),
                    Err(Error::EstimationFailed { .. }) => Ok(None),
                    Err(e) => Err(e),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((mle, ests))
        })
        .collect::<Result<_>>()?;

    let baseline_is_mle = rows.iter().all(|(m, _)| m.is_some());
    let points: Vec<BiasPoint> = config
        .epsilons
        .iter()
        .enumerate()
        .map(|(e, &eps)| {
            let mut bias = Vec::new();
            let mut err = Vec::new();
            for (mle, ests) in &rows {
                if let Some(t) = &ests[e] {
                    let base = if baseline_is_mle { mle.as_ref().expect("checked") } else { &config.theta_star };
                    bias.push(t.iter().zip(base).map(|(a, b)| (a - b).abs()).collect());
                    err.push(t.iter().zip(&config.theta_star).map(|(a, b)| (a - b).abs()).collect());
                }
            }
            let (b, bse) = coordinate_stats(&bias, d);
            let (a, ase) = coordinate_stats(&err, d);
            BiasPoint {
                epsilon: eps,
                bias: b,
                bias_se: bse,
                abs_error: a,
                abs_error_se: ase,
                replicates_used: bias.len(),
                failures: rows.len() - bias.len(),
            }
        })
        .collect();

    let fit: Vec<&BiasPoint> = points.iter().take(4).collect();
    let slope = (0..d)
        .map(|j| {
            (fit.len() >= 2 && fit.iter().all(|p| p.bias[j] > 0.0)).then(|| {
                let x: Vec<f64> = fit.iter().map(|p| p.epsilon.ln()).collect();
                let y: Vec<f64> = fit.iter().map(|p| p.bias[j].ln()).collect();
                ols_slope(&x, &y)
            })
        })
        .collect();

    let (mle_abs_error, mle_band) = if baseline_is_mle {
        let errs: Vec<Vec<f64>> = rows
            .iter()
            .map(|(m, _)| {
                m.as_ref()
                    .expect("checked")
                    .iter()
                    .zip(&config.theta_star)
                    .map(|(a, b)| (a - b).abs())
                    .collect()
            })
            .collect();
        let band = estimate_fisher(&model, &theta, None, &FisherConfig::new(config.n, 10, config.seed))
            .ok()
            .map(|f| (0..d).map(|j| 3.0 / (config.n as f64 * f.matrix[j][j]).sqrt()).collect());
        (Some(coordinate_stats(&errs, d).0), band)
    } else {
        (None, None)
    };

    Ok(BiasCurve {
        theta_star: config.theta_star.clone(),
        method: config.method,
        baseline_is_mle,
        points,
        slope,
        mle_abs_error,
        mle_band,
        estimates: (0..config.epsilons.len())
            .map(|e| rows.iter().map(|(_, ests)| ests[e].clone()).collect())
            .collect(),
    })
}

/// One trajectory length of a consistency study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyPoint {
    pub n: usize,
    /// Median over replicates of `‖θ̂ − θ*‖` (Euclidean).
    pub median_error: f64,
    pub mean_error: f64,
    pub mean_error_se: f64,
    pub failures: usize,
}

/// Output of [`consistency`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyTable {
    pub epsilon: f64,
    pub method: Method,
    pub points: Vec<ConsistencyPoint>,
}

/// Estimation error as the trajectory length grows, at fixed ε.
pub fn consistency(config: &ExperimentConfig) -> Result<ConsistencyTable> {
    config.validate()?;
    let model = config.build_model()?;
    let theta = ParameterVector::for_model(&model, config.theta_star.clone())?;
    let optimizer = config.optimizer_for(&model);
    let backend = config.backend();
    let pert = config.perturbation(config.epsilons[0])?;
    let points = config
        .n_values
        .iter()
        .enumerate()
        .map(|(v, &n)| -> Result<ConsistencyPoint> {
            let errs: Vec<Option<f64>> = (0..config.replicates)
                .into_par_iter()
                .map(|r| -> Result<Option<f64>> {
                    let data = replicate_data(&model, &theta, n, config.seed, r, v as u64 + 1)?;
                    let seed = replicate_seed(config.seed, r);
                    match estimate(config.method, &model, &data, &pert, &backend, &optimizer, seed) {
                        Ok(est) => Ok(Some(
                            est.theta_hat
                                .iter()
                                .zip(&config.theta_star)
                                .map(|(a, b)| (a - b).powi(2))
                                .sum::<f64>()
                                .sqrt(),
                        )),
                        Err(Error::EstimationFailed { .. }) => Ok(None),
                        Err(e) => Err(e),
                    }
                })
                .collect::<Result<_>>()?;
            let ok: Vec<f64> = errs.iter().flatten().copied().collect();
            Ok(ConsistencyPoint {
                n,
                median_error: if ok.is_empty() { f64::NAN } else { median(&ok) },
                mean_error: if ok.is_empty() { f64::NAN } else { mean(&ok) },
                mean_error_se: std_error(&ok),
                failures: errs.len() - ok.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConsistencyTable {
        epsilon: pert.epsilon,
        method: config.method,
        points,
    })
}

/// Plain versus noisy ABC on the i.i.d. `±θ` model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathologyReport {
    pub epsilon: f64,
    pub n: usize,
    pub theta_star: f64,
    /// Exact ABC likelihood at θ = 0 and θ = θ* on the clean data.
    pub abc_likelihood_at_zero: f64,
    pub abc_likelihood_at_truth: f64,
    pub abc_theta_hat: f64,
    pub noisy_abc_theta_hat: f64,
    /// `(θ, log ABC likelihood on clean data, on noisified data)` over the grid.
    pub surface: Vec<(f64, f64, f64)>,
}

/// The i.i.d. `±θ` pathology: plain ABC is maximised at 0, noisy ABC is not.
pub fn example_3_2(config: &ExperimentConfig) -> Result<PathologyReport> {
    config.validate()?;
    let model = config.build_model()?;
    if !matches!(model, BuiltinModel::IidPmTheta(_)) {
        return Err(Error::config("model.model", "example_3_2 runs on iid_pm_theta"));
    }
    let theta = ParameterVector::for_model(&model, config.theta_star.clone())?;
    let pert = config.perturbation(config.epsilons[0])?;
    let data = replicate_data(&model, &theta, config.n, config.seed, 0, 0)?;
    let noisy = noisify_with_key(&data, &pert, noise_key(config.seed))?;
    let optimizer = config.optimizer_for(&model);
    let backend = config.backend();
    let plain_method = if pert.kernel.is_smooth() { Method::SmoothedAbc } else { Method::Abc };
    let noisy_method = if pert.kernel.is_smooth() { Method::SmoothedNoisyAbc } else { Method::NoisyAbc };
    let abc = estimate(plain_method, &model, &data, &pert, &backend, &optimizer, config.seed)?;
    let nabc = estimate(noisy_method, &model, &noisy, &pert, &backend, &optimizer, config.seed)?;
    let bounds = model.parameter_box();
    let surface = crate::estimate::grid_points(bounds.lower(0), bounds.upper(0), 0.01)
        .into_iter()
        .map(|t| -> Result<(f64, f64, f64)> {
            Ok((
                t,
                model.exact_abc_loglik(&[t], &data, &pert)?,
                model.exact_abc_loglik(&[t], &noisy, &pert)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PathologyReport {
        epsilon: pert.epsilon,
        n: config.n,
        theta_star: config.theta_star[0],
        abc_likelihood_at_zero: iid_abc_likelihood(0.0, data.observations(), pert.epsilon),
        abc_likelihood_at_truth: iid_abc_likelihood(config.theta_star[0], data.observations(), pert.epsilon),
        abc_theta_hat: abc.theta_hat[0],
        noisy_abc_theta_hat: nabc.theta_hat[0],
        surface,
    })
}

/// Information-loss curve of the configured model at θ*.
pub fn info_loss(config: &ExperimentConfig) -> Result<LossCurve> {
    config.validate()?;
    let model = config.build_model()?;
    let theta = ParameterVector::for_model(&model, config.theta_star.clone())?;
    let kernel = Kernel::parse(&config.kernel)?;
    information_loss_curve(
        &model,
        &theta,
        &config.epsilons,
        &kernel,
        &FisherConfig::new(config.n, config.replicates.max(2), config.seed),
    )
}

/// Record of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub experiment: ExperimentKind,
    pub crate_version: String,
    pub run_dir: PathBuf,
    /// Git-style (`blob <len>\0` prefixed) SHA-256 of the resolved config JSON.
    pub config_hash: String,
    pub config_file: PathBuf,
    pub outputs: Vec<OutputFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: PathBuf,
    pub hash: String,
}

pub const MANIFEST_SCHEMA: &str = "manifest/1";
pub const CSV_SCHEMA_VERSION: u32 = 1;

/// Git-style content hash: SHA-256 over `blob <len>\0` followed by the bytes.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// First `run-NNN` under `dir` that does not exist yet (created).
pub fn next_run_dir(dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    for i in 1..100_000 {
        let p = dir.join(format!("run-{i:03}"));
        match std::fs::create_dir(&p) {
            Ok(()) => return Ok(p),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(Error::Usage(format!("no free run directory under {}", dir.display())))
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn gnuplot(path: &Path, csv: &str, xcol: usize, ycol: usize, ecol: usize, ylabel: &str) -> Result<()> {
    let script = format!(
        "set datafile separator ','\nset key off\nset logscale xy\nset xlabel 'epsilon'\nset ylabel '{ylabel}'\n\
         set terminal pngcairo size 800,600\nset output '{stem}.png'\n\
         plot '{csv}' using {xcol}:{ycol}:{ecol} every ::1 with yerrorlines\n",
        stem = csv.trim_end_matches(".csv"),
    );
    std::fs::write(path, script)?;
    Ok(())
}

/// Run the configured experiment, writing outputs into a fresh run directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunManifest> {
    config.validate()?;
    let run_dir = next_run_dir(&config.output_dir)?;
    let config_file = run_dir.join("config.json");
    let config_text = serde_json::to_string_pretty(config)? + "\n";
    std::fs::write(&config_file, &config_text)?;
    let mut outputs = Vec::new();

    match config.experiment {
        ExperimentKind::BiasCurve | ExperimentKind::Custom => {
            let curve = bias_curve(config)?;
            let d = config.theta_star.len();
            let mut header = vec!["epsilon".to_string()];
            for j in 1..=d {
                header.extend([format!("bias_{j}"), format!("bias_se_{j}"), format!("abs_error_{j}"), format!("abs_error_se_{j}")]);
            }
            header.extend(["replicates_used".to_string(), "failures".to_string()]);
            let rows: Vec<Vec<String>> = curve
                .points
                .iter()
                .map(|p| {
                    let mut row = vec![fmt_f64(p.epsilon)];
                    for j in 0..d {
                        row.extend([p.bias[j], p.bias_se[j], p.abs_error[j], p.abs_error_se[j]].map(fmt_f64));
                    }
                    row.extend([p.replicates_used.to_string(), p.failures.to_string()]);
                    row
                })
                .collect();
            let csv_path = run_dir.join("bias_curve.csv");
            write_csv(&csv_path, &header, &rows)?;
            outputs.push(csv_path);
            let est_header: Vec<String> = ["epsilon".to_string(), "replicate".to_string()]
                .into_iter()
                .chain((1..=d).map(|j| format!("theta_hat_{j}")))
                .collect();
            let mut est_rows = Vec::new();
            for (e, eps) in config.epsilons.iter().enumerate() {
                for (r, t) in curve.estimates[e].iter().enumerate() {
                    let mut row = vec![fmt_f64(*eps), r.to_string()];
                    match t {
                        Some(t) => row.extend(t.iter().map(|v| fmt_f64(*v))),
                        None => row.extend((0..d).map(|_| String::new())),
                    }
                    est_rows.push(row);
                }
            }
            let est_path = run_dir.join("estimates.csv");
            write_csv(&est_path, &est_header, &est_rows)?;
            outputs.push(est_path);
            let json_path = run_dir.join("bias_curve.json");
            write_json(&json_path, &serde_json::json!({"schema_version": CSV_SCHEMA_VERSION, "curve": curve}))?;
            outputs.push(json_path);
            if config.plot {
                let gp = run_dir.join("bias_curve.gp");
                gnuplot(&gp, "bias_curve.csv", 1, 2, 3, "mean bias")?;
                outputs.push(gp);
            }
        }
        ExperimentKind::InfoLossCurve => {
            let curve = info_loss(config)?;
            let csv_path = run_dir.join("loss_curve.csv");
            curve.write(&csv_path)?;
            outputs.push(csv_path.clone());
            outputs.push(crate::sampling::sidecar_path(&csv_path));
            if config.plot {
                let gp = run_dir.join("loss_curve.gp");
                gnuplot(&gp, "loss_curve.csv", 1, 2, 3, "||I - I_eps||_F")?;
                outputs.push(gp);
            }
        }
        ExperimentKind::Consistency => {
            let table = consistency(config)?;
            let header: Vec<String> = ["n", "median_error", "mean_error", "mean_error_se", "failures"]
                .map(String::from)
                .to_vec();
            let rows: Vec<Vec<String>> = table
                .points
                .iter()
                .map(|p| {
                    vec![
                        p.n.to_string(),
                        fmt_f64(p.median_error),
                        fmt_f64(p.mean_error),
                        fmt_f64(p.mean_error_se),
                        p.failures.to_string(),
                    ]
                })
                .collect();
            let csv_path = run_dir.join("consistency.csv");
            write_csv(&csv_path, &header, &rows)?;
            outputs.push(csv_path);
            let json_path = run_dir.join("consistency.json");
            write_json(&json_path, &serde_json::json!({"schema_version": CSV_SCHEMA_VERSION, "table": table}))?;
            outputs.push(json_path);
        }
        ExperimentKind::Example32 => {
            let rep = example_3_2(config)?;
            let header: Vec<String> = ["theta", "abc_loglik", "noisy_abc_loglik"].map(String::from).to_vec();
            let rows: Vec<Vec<String>> = rep
                .surface
                .iter()
                .map(|(t, a, b)| vec![fmt_f64(*t), fmt_f64(*a), fmt_f64(*b)])
                .collect();
            let csv_path = run_dir.join("surface.csv");
            write_csv(&csv_path, &header, &rows)?;
            outputs.push(csv_path);
            let json_path = run_dir.join("summary.json");
            let mut summary = rep.clone();
            summary.surface.clear();
            write_json(&json_path, &serde_json::json!({"schema_version": CSV_SCHEMA_VERSION, "summary": summary}))?;
            outputs.push(json_path);
        }
    }

    let outputs = outputs
        .into_iter()
        .map(|p| -> Result<OutputFile> {
            let hash = content_hash(&std::fs::read(&p)?);
            Ok(OutputFile { path: p, hash })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = RunManifest {
        schema: MANIFEST_SCHEMA.into(),
        experiment: config.experiment,
        crate_version: env!("CARGO_PKG_VERSION").into(),
        config_hash: content_hash(config_text.as_bytes()),
        config_file,
        outputs,
        run_dir: run_dir.clone(),
    };
    write_json(&run_dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Worker count from `ABC_HMM_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var("ABC_HMM_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| Error::config("ABC_HMM_THREADS", format!("expected a positive integer, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

/// Run `f` on a pool capped by `ABC_HMM_THREADS` (the global pool otherwise).
pub fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    match thread_cap()? {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Usage(e.to_string()))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn git_style_hash_of_empty_blob() {
        // matches `git hash-object --object-format=sha256` of an empty file
        assert_eq!(
            content_hash(b""),
            "473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813"
        );
    }

    #[test]
    fn presets_validate() {
        for name in ExperimentKind::NAMES {
            let kind = ExperimentKind::parse(name).unwrap();
            ExperimentConfig::preset(kind, 1, "out").validate().unwrap();
        }
    }

    #[test]
    fn run_directories_are_versioned() {
        let dir = tempfile::tempdir().unwrap();
        assert!(next_run_dir(dir.path()).unwrap().ends_with("run-001"));
        assert!(next_run_dir(dir.path()).unwrap().ends_with("run-002"));
    }

    #[test]
    fn config_requires_seed() {
        let mut v = serde_json::to_value(ExperimentConfig::preset(ExperimentKind::BiasCurve, 1, "o")).unwrap();
        v.as_object_mut().unwrap().remove("seed");
        let e = serde_json::from_value::<ExperimentConfig>(v).unwrap_err();
        assert!(e.to_string().contains("seed"));
    }
}
