//! Filters started from opposite point masses merge geometrically; the
//! rate is bounded by a constant computed from the model's density bounds.

use abc_hmm::model::{ModelConfig, ParameterVector};
use abc_hmm::oracle::{filter_tv_forgetting, forgetting_rate, point_mass};
use abc_hmm::sampling::simulate;
use serde_json::json;

fn main() -> abc_hmm::Result<()> {
    let model = ModelConfig::named("finite_gaussian")
        .with_hyper(json!({
            "centers": [-0.5, 0.5],
            "transition": [[0.6, 0.4], [0.4, 0.6]],
            "support": [-1.0, 1.0]
        }))
        .build()?;
    let theta = ParameterVector::for_model(&model, vec![1.0])?;
    let data = simulate(&model, &theta, 50, 2)?;
    let bound = forgetting_rate(&model, theta.values(), &data)?;
    let tv = filter_tv_forgetting(&model, theta.values(), &data, &point_mass(2, 0), &point_mass(2, 1))?;
    println!("rho = {:.4}; window for 1e-6: {}", bound.rho, bound.window_for(1e-6));
    for (k, d) in tv.iter().enumerate().step_by(5) {
        println!("k = {:2}  TV = {:.3e}  rho^k = {:.3e}", k + 1, d, bound.rho.powi(k as i32 + 1));
    }
    Ok(())
}
