//! Smoothed ABC with a Gaussian kernel, with and without noisifying the
//! data first, compared with the exact MLE.

use abc_hmm::estimate::{estimate, exact_mle, Backend, Method, Optimizer};
use abc_hmm::model::{Kernel, ModelConfig, ParameterVector, PerturbationSpec};
use abc_hmm::sampling::{noisify, simulate};

fn main() -> abc_hmm::Result<()> {
    let model = ModelConfig::named("finite_gaussian").build()?;
    let theta = ParameterVector::for_model(&model, vec![1.0])?;
    let data = simulate(&model, &theta, 1000, 5)?;
    let optimizer = Optimizer::GridThenGolden { step: 0.05, tol: 1e-5 };
    let mle = exact_mle(&model, &data, &optimizer)?;
    println!("exact MLE: {:.4}", mle.theta_hat[0]);

    for eps in [0.25, 0.5, 1.0] {
        let pert = PerturbationSpec { epsilon: eps, kernel: Kernel::parse("gaussian")?, norm: Default::default() };
        let smoothed = estimate(Method::SmoothedAbc, &model, &data, &pert, &Backend::Oracle, &optimizer, 5)?;
        let noisy_data = noisify(&data, &pert, 5)?;
        let noisy = estimate(Method::SmoothedNoisyAbc, &model, &noisy_data, &pert, &Backend::Oracle, &optimizer, 5)?;
        let smc = estimate(Method::SmoothedAbc, &model, &data, &pert, &Backend::smc(300), &Optimizer::Grid { step: 0.1 }, 5)?;
        println!(
            "eps {eps:4}: smoothed {:.4}  smoothed-noisy {:.4}  smoothed via SMC {:.2}",
            smoothed.theta_hat[0], noisy.theta_hat[0], smc.theta_hat[0]
        );
    }
    Ok(())
}
