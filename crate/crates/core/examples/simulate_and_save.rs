//! Simulate a finite Gaussian HMM, noisify a copy, and round-trip both
//! through CSV with their JSON sidecars.

use abc_hmm::model::{ModelConfig, ParameterVector, PerturbationSpec};
use abc_hmm::sampling::{noisify, read_trajectory, sidecar_path, simulate, write_trajectory};
use serde_json::json;

fn main() -> abc_hmm::Result<()> {
    let model = ModelConfig::named("finite_gaussian")
        .with_hyper(json!({"centers": [-1.0, 1.0], "transition": [[0.9, 0.1], [0.2, 0.8]]}))
        .build()?;
    let theta = ParameterVector::for_model(&model, vec![0.7])?;
    let traj = simulate(&model, &theta, 500, 42)?;
    let noisy = noisify(&traj, &PerturbationSpec::uniform(0.25), 42)?;

    let dir = std::env::temp_dir().join("abc-hmm-simulate");
    std::fs::create_dir_all(&dir)?;
    let clean_path = dir.join("clean.csv");
    let noisy_path = dir.join("noisy.csv");
    write_trajectory(&traj, &clean_path)?;
    write_trajectory(&noisy, &noisy_path)?;

    let back = read_trajectory(&noisy_path)?;
    assert_eq!(back.observations(), noisy.observations());
    println!("wrote {} and {}", clean_path.display(), sidecar_path(&noisy_path).display());
    println!("first observations: {:?}", &traj.observations()[..5]);
    println!("noisified:          {:?}", &back.observations()[..5]);
    println!("noise_epsilon in sidecar: {:?}", back.meta.noise_epsilon);
    Ok(())
}
