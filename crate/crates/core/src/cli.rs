//! Command-line front end: `simulate`, `likelihood`, `estimate`, `fisher`
//! and `experiment`.
//!
//! Exit codes: 0 on success, 2 on configuration or usage errors (the message
//! names the offending key), 1 when estimation fails or on I/O errors.

use crate::error::{Error, Result};
use crate::estimate::{estimate, Backend, Method, Optimizer};
use crate::experiments::{run_experiment, with_thread_cap, ExperimentConfig, ExperimentKind};
use crate::fisher::{estimate_fisher, information_loss_curve, FisherConfig};
use crate::model::{BallNorm, BuiltinModel, HiddenMarkovModel, Kernel, ModelConfig, ParameterVector, PerturbationSpec};
use crate::oracle::ExactLikelihood;
use crate::sampling::{noisify, read_trajectory, simulate, write_trajectory, Trajectory};
use crate::smc::{smc_abc_likelihood, Resampling, SmcConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{Map, Value};
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "abc-hmm", version, about = "ABC maximum-likelihood estimation for hidden Markov models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a trajectory and write it as CSV plus a JSON sidecar.
    Simulate(SimulateArgs),
    /// Estimate the ABC log-likelihood at one parameter value.
    Likelihood(LikelihoodArgs),
    /// Run an ABC, noisy ABC, smoothed ABC or exact estimator.
    Estimate(EstimateArgs),
    /// Estimate the Fisher information, or an information-loss curve over ε.
    Fisher(FisherArgs),
    /// Run an experiment preset into a versioned output directory.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Built-in model name.
    #[arg(long, default_value = "finite_gaussian")]
    model: String,
    /// Hyper-parameters as a JSON object.
    #[arg(long)]
    hyper: Option<String>,
    /// Parameter box, `lo:hi` per coordinate, comma separated.
    #[arg(long)]
    theta_box: Option<String>,
    /// JSON model definition file (overrides --model/--hyper/--theta-box).
    #[arg(long)]
    model_config: Option<PathBuf>,
}

impl ModelArgs {
    fn config(&self) -> Result<ModelConfig> {
        if let Some(path) = &self.model_config {
            return ModelConfig::from_json(&std::fs::read_to_string(path)?);
        }
        let hyper = match &self.hyper {
            Some(h) => serde_json::from_str(h).map_err(|e| Error::config("hyper", e.to_string()))?,
            None => Value::Object(Map::new()),
        };
        Ok(ModelConfig {
            model: self.model.clone(),
            hyper,
            theta_box: self.theta_box.as_deref().map(parse_box).transpose()?,
        })
    }
}

fn parse_box(s: &str) -> Result<Vec<[f64; 2]>> {
    s.split(',')
        .map(|iv| {
            let (lo, hi) = iv
                .split_once(':')
                .ok_or_else(|| Error::config("theta_box", format!("expected lo:hi, got `{iv}`")))?;
            let num = |t: &str| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::config("theta_box", format!("not a number: `{t}`")))
            };
            Ok([num(lo)?, num(hi)?])
        })
        .collect()
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Trajectory CSV to use as data (simulated from --theta-star otherwise).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Parameter to simulate data at.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta_star: Option<Vec<f64>>,
    /// Trajectory length for simulated data.
    #[arg(long, default_value_t = 1000)]
    n: usize,
}

impl DataArgs {
    fn load(&self, model: &BuiltinModel, seed: u64) -> Result<Trajectory> {
        match (&self.data, &self.theta_star) {
            (Some(path), _) => read_trajectory(path),
            (None, Some(theta)) => {
                let theta = ParameterVector::for_model(model, theta.clone())
                    .map_err(|e| Error::config("theta_star", e.to_string()))?;
                simulate(model, &theta, self.n, seed)
            }
            (None, None) => Err(Error::config("data", "pass --data FILE or --theta-star to simulate")),
        }
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    theta_star: Vec<f64>,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Also noisify the trajectory with this ε.
    #[arg(long)]
    noise_epsilon: Option<f64>,
    #[arg(long, default_value = "uniform")]
    kernel: String,
    /// Output CSV path; the sidecar goes next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BackendArg {
    /// Exact oracle when the model supports it, SMC otherwise.
    Auto,
    Smc,
    Oracle,
}

#[derive(Debug, Args)]
struct PerturbArgs {
    #[arg(long)]
    epsilon: f64,
    /// uniform, gaussian or logistic.
    #[arg(long, default_value = "uniform")]
    kernel: String,
    /// Ball norm for the uniform kernel: linf or l2.
    #[arg(long, default_value = "linf")]
    norm: String,
}

impl PerturbArgs {
    fn spec(&self) -> Result<PerturbationSpec> {
        let spec = PerturbationSpec {
            epsilon: self.epsilon,
            kernel: Kernel::parse(&self.kernel)?,
            norm: BallNorm::parse(&self.norm)?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Args)]
struct LikelihoodArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    pert: PerturbArgs,
    /// Parameter value to evaluate at (defaults to --theta-star).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1000)]
    particles: usize,
    /// multinomial or systematic[:threshold].
    #[arg(long, default_value = "multinomial")]
    resampling: String,
    #[arg(long)]
    seed: u64,
    /// Stream index; different streams give independent estimates.
    #[arg(long, default_value_t = 0)]
    stream: u64,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    pert: PerturbArgs,
    /// abc, noisy_abc, smoothed_abc, smoothed_noisy_abc, exact_mle or exact_abc_mle.
    #[arg(long, default_value = "abc")]
    method: String,
    #[arg(long, value_enum, default_value = "auto")]
    backend: BackendArg,
    #[arg(long, default_value_t = 1000)]
    particles: usize,
    #[arg(long, default_value = "multinomial")]
    resampling: String,
    /// grid:STEP, grid_then_golden:STEP[:TOL] or nelder_mead[:RESTARTS].
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    seed: u64,
    /// Directory for estimate.json and trace.csv (JSON goes to stdout otherwise).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FisherArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    theta: Vec<f64>,
    /// One ε gives `I^ε`; several give a loss curve. None gives `I`.
    #[arg(long, value_delimiter = ',')]
    epsilons: Vec<f64>,
    #[arg(long, default_value = "uniform")]
    kernel: String,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 50)]
    replicates: usize,
    #[arg(long)]
    seed: u64,
    /// Disable antithetic noise pairing.
    #[arg(long)]
    no_antithetic: bool,
    /// Output path: JSON for a single estimate, CSV (+ sidecar) for a curve.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// bias_curve, info_loss_curve, consistency, example_3_2 or custom.
    #[arg(long)]
    preset: Option<String>,
    /// JSON config merged over the preset defaults (flags win over both).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    n_values: Option<Vec<usize>>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta_star: Option<Vec<f64>>,
    #[arg(long)]
    method: Option<String>,
    /// oracle or smc.
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long)]
    kernel: Option<String>,
    /// Also write a gnuplot script.
    #[arg(long)]
    plot: bool,
}

/// Run the CLI on `args` (including the program name), writing results to
/// stdout and diagnostics to stderr. Returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_cli_with(args, &mut std::io::stdout(), &mut std::io::stderr())
}

/// [`run_cli`] with explicit output streams.
pub fn run_cli_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    let result = with_thread_cap(|| dispatch(cli.command)).and_then(|r| r);
    match result {
        Ok(text) => {
            if !text.is_empty() {
                let _ = writeln!(out, "{text}");
            }
            0
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Usage(_) | Error::Domain(_) | Error::Unsupported(_) => 2,
        _ => 1,
    }
}

fn dispatch(cmd: Command) -> Result<String> {
    match cmd {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Likelihood(a) => cmd_likelihood(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Fisher(a) => cmd_fisher(a),
        Command::Experiment(a) => cmd_experiment(a),
    }
}

fn cmd_simulate(a: SimulateArgs) -> Result<String> {
    let model = a.model.config()?.build()?;
    let theta = ParameterVector::for_model(&model, a.theta_star).map_err(|e| Error::config("theta_star", e.to_string()))?;
    let mut traj = simulate(&model, &theta, a.n, a.seed)?;
    if let Some(eps) = a.noise_epsilon {
        let pert = PerturbArgs {
            epsilon: eps,
            kernel: a.kernel,
            norm: "linf".into(),
        }
        .spec()?;
        traj = noisify(&traj, &pert, a.seed)?;
    }
    write_trajectory(&traj, &a.out)?;
    Ok(a.out.display().to_string())
}

fn cmd_likelihood(a: LikelihoodArgs) -> Result<String> {
    let model = a.model.config()?.build()?;
    let data = a.data.load(&model, a.seed)?;
    let theta = a
        .theta
        .or(a.data.theta_star.clone())
        .ok_or_else(|| Error::config("theta", "pass --theta (or --theta-star)"))?;
    let cfg = SmcConfig::new(a.particles, a.seed)
        .resampling(Resampling::parse(&a.resampling)?)
        .stream(a.stream);
    let est = smc_abc_likelihood(&model, &theta, &data, &a.pert.spec()?, &cfg)?;
    emit(&est, a.out.as_deref())
}

fn backend_for(choice: BackendArg, model: &BuiltinModel, particles: usize, resampling: &str) -> Result<Backend> {
    let smc = || -> Result<Backend> {
        Ok(Backend::Smc {
            num_particles: particles,
            resampling: Resampling::parse(resampling)?,
        })
    };
    match choice {
        BackendArg::Smc => smc(),
        BackendArg::Oracle => Ok(Backend::Oracle),
        BackendArg::Auto => {
            let probe = Trajectory::observed(&[0.0; 1])?;
            let theta = model.parameter_box().bounds().iter().map(|b| 0.5 * (b[0] + b[1])).collect::<Vec<_>>();
            if model.obs_dim() == 1 && model.exact_abc_loglik(&theta, &probe, &PerturbationSpec::uniform(1.0)).is_ok() {
                Ok(Backend::Oracle)
            } else {
                smc()
            }
        }
    }
}

fn cmd_estimate(a: EstimateArgs) -> Result<String> {
    let model = a.model.config()?.build()?;
    let method = Method::parse(&a.method)?;
    let data = a.data.load(&model, a.seed)?;
    let backend = backend_for(a.backend, &model, a.particles, &a.resampling)?;
    let optimizer = match &a.optimizer {
        Some(s) => Optimizer::parse(s)?,
        None => Optimizer::default_for(&model.parameter_box()),
    };
    let result = estimate(method, &model, &data, &a.pert.spec()?, &backend, &optimizer, a.seed)?;
    if let Some(dir) = &a.out_dir {
        std::fs::create_dir_all(dir)?;
        result.write_json(&dir.join("estimate.json"))?;
        result.write_trace_csv(&dir.join("trace.csv"))?;
    }
    result.to_json()
}

fn cmd_fisher(a: FisherArgs) -> Result<String> {
    let model = a.model.config()?.build()?;
    let theta = ParameterVector::for_model(&model, a.theta).map_err(|e| Error::config("theta", e.to_string()))?;
    let cfg = FisherConfig::new(a.n, a.replicates, a.seed).antithetic(!a.no_antithetic);
    let kernel = Kernel::parse(&a.kernel)?;
    if a.epsilons.len() > 1 {
        let curve = information_loss_curve(&model, &theta, &a.epsilons, &kernel, &cfg)?;
        if let Some(path) = &a.out {
            curve.write(path)?;
        }
        return Ok(serde_json::to_string_pretty(&curve)?);
    }
    let pert = a
        .epsilons
        .first()
        .map(|&epsilon| PerturbationSpec {
            epsilon,
            kernel,
            norm: BallNorm::Linf,
        });
    let est = estimate_fisher(&model, &theta, pert.as_ref(), &cfg)?;
    emit(&est, a.out.as_deref())
}

fn emit<T: serde::Serialize>(value: &T, path: Option<&std::path::Path>) -> Result<String> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => {
            std::fs::write(p, text + "\n")?;
            Ok(p.display().to_string())
        }
        None => Ok(text),
    }
}

/// Resolve an experiment configuration: preset defaults, then the JSON file,
/// then explicit flags. The seed has no default.
fn resolve_experiment(a: &ExperimentArgs) -> Result<ExperimentConfig> {
    let file: Option<Value> = match &a.config {
        Some(p) => Some(serde_json::from_str(&std::fs::read_to_string(p)?).map_err(|e| Error::config("config", e.to_string()))?),
        None => None,
    };
    let from_file = file.as_ref().and_then(|v| v.get("experiment")).and_then(Value::as_str);
    let kind_name = a
        .preset
        .as_deref()
        .or(from_file)
        .ok_or_else(|| Error::config("preset", "pass --preset or set `experiment` in the config file"))?;
    let kind = ExperimentKind::parse(kind_name)?;

    let mut merged = serde_json::to_value(ExperimentConfig::preset(kind, 0, "runs"))?;
    let obj = merged.as_object_mut().expect("config serializes to an object");
    obj.remove("seed");
    if let Some(Value::Object(f)) = file {
        for (k, v) in f {
            obj.insert(k, v);
        }
    } else if file.is_some() {
        return Err(Error::config("config", "expected a JSON object"));
    }
    let mut set = |k: &str, v: Value| {
        obj.insert(k.to_string(), v);
    };
    set("experiment", Value::String(kind.name().into()));
    if let Some(s) = a.seed {
        set("seed", s.into());
    }
    if let Some(d) = &a.output_dir {
        set("output_dir", Value::String(d.display().to_string()));
    }
    if let Some(e) = &a.epsilons {
        set("epsilons", serde_json::to_value(e)?);
    }
    if let Some(n) = a.n {
        set("n", n.into());
    }
    if let Some(v) = &a.n_values {
        set("n_values", serde_json::to_value(v)?);
    }
    if let Some(r) = a.replicates {
        set("replicates", r.into());
    }
    if let Some(t) = &a.theta_star {
        set("theta_star", serde_json::to_value(t)?);
    }
    if let Some(m) = &a.method {
        set("method", serde_json::to_value(Method::parse(m)?)?);
    }
    if let Some(b) = &a.backend {
        set("backend", Value::String(b.clone()));
    }
    if let Some(p) = a.particles {
        set("num_particles", p.into());
    }
    if let Some(k) = &a.kernel {
        set("kernel", Value::String(k.clone()));
    }
    if a.plot {
        set("plot", true.into());
    }
    let config: ExperimentConfig = serde_json::from_value(merged).map_err(|e| {
        let msg = e.to_string();
        let key = msg.split('`').nth(1).unwrap_or("config").to_string();
        Error::config(key, msg)
    })?;
    config.validate()?;
    Ok(config)
}

fn cmd_experiment(a: ExperimentArgs) -> Result<String> {
    let config = resolve_experiment(&a)?;
    let manifest = run_experiment(&config)?;
    Ok(serde_json::to_string_pretty(&manifest)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_cli_with(std::iter::once("abc-hmm").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn box_flag_parses() {
        assert_eq!(parse_box("0:3, -1:1").unwrap(), vec![[0.0, 3.0], [-1.0, 1.0]]);
        assert!(matches!(parse_box("0-3"), Err(Error::Config { .. })));
    }

    #[test]
    fn missing_seed_is_a_config_error_naming_seed() {
        let (code, _, err) = run(&["experiment", "--preset", "bias_curve"]);
        assert_eq!(code, 2);
        assert!(err.contains("`seed`"), "{err}");
    }

    #[test]
    fn unknown_model_names_the_key() {
        let (code, _, err) = run(&["likelihood", "--model", "nope", "--theta-star", "1", "--epsilon", "1", "--seed", "1"]);
        assert_eq!(code, 2);
        assert!(err.contains("`model`"), "{err}");
    }
}
