//! Fisher information of a two-parameter Gaussian HMM and the information
//! lost to the ABC perturbation across ε.

use abc_hmm::fisher::{estimate_fisher, information_loss_curve, FisherConfig};
use abc_hmm::model::{Kernel, ModelConfig, ParameterVector};
use serde_json::json;

fn main() -> abc_hmm::Result<()> {
    let model = ModelConfig::named("finite_gaussian")
        .with_hyper(json!({"parameterization": "location_scale"}))
        .build()?;
    let theta = ParameterVector::for_model(&model, vec![1.0, 0.0])?;
    let cfg = FisherConfig::new(1000, 20, 1);

    let info = estimate_fisher(&model, &theta, None, &cfg)?;
    println!("I(theta*) = {:?}", info.matrix);

    let eps = [0.05, 0.1, 0.2, 0.4, 1.0, 10.0, 100.0];
    let curve = information_loss_curve(&model, &theta, &eps, &Kernel::UniformBall, &cfg)?;
    println!("{:>7} {:>12} {:>10} {:>12}", "eps", "||I - I^e||", "se", "min eig");
    for p in &curve.points {
        println!("{:>7} {:>12.5} {:>10.5} {:>12.5}", p.epsilon, p.loss, p.loss_se, p.min_eig);
    }
    println!("small-eps slope {:?} (reliable: {})", curve.slope, curve.slope_reliable);
    println!("large-eps slope {:?}", curve.large_eps_slope);
    Ok(())
}
