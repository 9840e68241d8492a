//! ABC on a summary of each observation: `|Y_k|` discards the sign, so
//! only the spread of a symmetric model stays identifiable.

use abc_hmm::estimate::{estimate, Backend, Method, Optimizer};
use abc_hmm::model::{apply_summary, ModelConfig, ParameterVector, PerturbationSpec, Summarized, Summary};
use abc_hmm::sampling::simulate;
use serde_json::json;

fn main() -> abc_hmm::Result<()> {
    let base = ModelConfig::named("finite_gaussian")
        .with_hyper(json!({"centers": [-2.0, 2.0], "parameterization": "sd"}))
        .build()?;
    let theta = ParameterVector::for_model(&base, vec![0.8])?;
    let data = simulate(&base, &theta, 300, 4)?;
    let summary = Summary::abs();
    let summarized_data = apply_summary(&data, &summary);
    let model = Summarized::new(base, summary);

    let est = estimate(
        Method::Abc,
        &model,
        &summarized_data,
        &PerturbationSpec::uniform(0.3),
        &Backend::smc(300),
        &Optimizer::GridThenGolden { step: 0.1, tol: 1e-3 },
        4,
    )?;
    println!("summary {:?}", summarized_data.meta.summary);
    println!("theta* = {:?}, ABC on |Y|: {:.3?}", theta.values(), est.theta_hat);
    Ok(())
}
