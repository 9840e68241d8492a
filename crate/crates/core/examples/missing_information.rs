//! Two independent estimates of `I − I^ε`: the expected conditional
//! information gap over short windows, and the difference of long-trajectory
//! information estimates.

use abc_hmm::fisher::{missing_information_check, FisherConfig, MissingInfoConfig};
use abc_hmm::model::{ModelConfig, ParameterVector, PerturbationSpec};
use serde_json::json;

fn main() -> abc_hmm::Result<()> {
    let model = ModelConfig::named("finite_gaussian")
        .with_hyper(json!({"transition": [[0.6, 0.4], [0.4, 0.6]]}))
        .build()?;
    let theta = ParameterVector::for_model(&model, vec![1.0])?;
    for eps in [0.2, 1.0] {
        let cfg = MissingInfoConfig {
            past: 4,
            future: 3,
            windows: 20_000,
            direct: FisherConfig::new(2000, 20, 11),
            seed: 5,
        };
        let r = missing_information_check(&model, &theta, &PerturbationSpec::uniform(eps), &cfg)?;
        println!(
            "eps {eps}: window {:.5} ± {:.5}  direct {:.5} ± {:.5}  z = {:.2}  truncation {:.1e}",
            r.missing[0][0], r.missing_se[0][0], r.direct[0][0], r.direct_se[0][0], r.max_z(), r.truncation
        );
    }
    Ok(())
}
