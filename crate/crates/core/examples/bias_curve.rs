//! ABC estimator bias as a function of ε, written to a versioned run
//! directory with a manifest.

use abc_hmm::experiments::{run_experiment, ExperimentConfig, ExperimentKind};

fn main() -> abc_hmm::Result<()> {
    let out = std::env::temp_dir().join("abc-hmm-bias");
    let mut config = ExperimentConfig::preset(ExperimentKind::BiasCurve, 7, &out);
    config.replicates = 5;
    config.plot = true;
    let manifest = run_experiment(&config)?;
    println!("run directory: {}", manifest.run_dir.display());
    for f in &manifest.outputs {
        println!("  {}  {}", &f.hash[..12], f.path.display());
    }
    print!("{}", std::fs::read_to_string(manifest.run_dir.join("bias_curve.csv"))?);
    Ok(())
}
