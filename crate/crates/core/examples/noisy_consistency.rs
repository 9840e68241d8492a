//! Noisy ABC error shrinking with the trajectory length at fixed ε.

use abc_hmm::experiments::{consistency, ExperimentConfig, ExperimentKind};

fn main() -> abc_hmm::Result<()> {
    let mut config = ExperimentConfig::preset(ExperimentKind::Consistency, 1, std::env::temp_dir());
    config.replicates = 10;
    let table = consistency(&config)?;
    println!("noisy ABC, eps = {}", table.epsilon);
    println!("{:>6} {:>14} {:>14}", "n", "median error", "mean error");
    for p in &table.points {
        println!("{:>6} {:>14.5} {:>9.5} ± {:.5}", p.n, p.median_error, p.mean_error, p.mean_error_se);
    }
    Ok(())
}
