use abc_hmm::model::{BallNorm, ModelConfig, ParameterVector, PerturbationSpec};
use abc_hmm::oracle::{forward_loglik, iid_abc_likelihood, ExactLikelihood};
use abc_hmm::sampling::{noisify, simulate, Trajectory};
use abc_hmm::smc::{effective_sample_size, smc_abc_likelihood, Resampling, SmcConfig};
use proptest::prelude::*;
use serde_json::json;

fn two_state() -> abc_hmm::model::BuiltinModel {
    ModelConfig::named("finite_gaussian").build().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn uniform_noise_stays_in_the_ball(seed in any::<u64>(), eps in 0.01f64..3.0, l2 in any::<bool>()) {
        let model = two_state();
        let theta = ParameterVector::for_model(&model, vec![1.0]).unwrap();
        let data = simulate(&model, &theta, 40, seed).unwrap();
        let norm = if l2 { BallNorm::L2 } else { BallNorm::Linf };
        let noisy = noisify(&data, &PerturbationSpec::uniform(eps).with_norm(norm), seed).unwrap();
        for (a, b) in data.observations().iter().zip(noisy.observations()) {
            prop_assert!((a - b).abs() <= eps);
        }
        prop_assert!(noisify(&noisy, &PerturbationSpec::uniform(eps), seed).is_err());
    }

    #[test]
    fn smc_estimate_is_internally_consistent(
        seed in any::<u64>(),
        eps in 0.05f64..2.0,
        theta in 0.2f64..2.5,
        systematic in any::<bool>(),
    ) {
        let model = two_state();
        let truth = ParameterVector::for_model(&model, vec![1.0]).unwrap();
        let data = simulate(&model, &truth, 25, seed).unwrap();
        let resampling = if systematic { Resampling::SystematicEss { threshold: 0.5 } } else { Resampling::MultinomialAlways };
        let cfg = SmcConfig::new(64, seed).resampling(resampling);
        let est = smc_abc_likelihood(&model, &[theta], &data, &PerturbationSpec::uniform(eps), &cfg).unwrap();
        prop_assert!(est.step_acceptance.iter().all(|&a| (0.0..=1.0).contains(&a)));
        prop_assert!(est.ess_trace.iter().all(|&e| e <= 64.0 + 1e-9));
        match est.collapsed_at {
            Some(k) => {
                prop_assert_eq!(est.log_value, f64::NEG_INFINITY);
                prop_assert_eq!(est.step_acceptance.len(), k);
                prop_assert_eq!(*est.step_acceptance.last().unwrap(), 0.0);
            }
            None => {
                prop_assert_eq!(est.step_acceptance.len(), 25);
                if !systematic {
                    let sum: f64 = est.step_acceptance.iter().map(|a| a.ln()).sum();
                    prop_assert!((sum - est.log_value).abs() <= 1e-9 * sum.abs().max(1.0));
                }
            }
        }
        // same key, same answer
        let again = smc_abc_likelihood(&model, &[theta], &data, &PerturbationSpec::uniform(eps), &cfg).unwrap();
        prop_assert_eq!(est.log_value.to_bits(), again.log_value.to_bits());
    }

    #[test]
    fn exact_abc_probability_grows_with_epsilon(seed in any::<u64>(), e1 in 0.01f64..2.0, factor in 1.0f64..4.0) {
        let model = two_state();
        let theta = ParameterVector::for_model(&model, vec![1.0]).unwrap();
        let data = simulate(&model, &theta, 20, seed).unwrap();
        let small = model.exact_abc_loglik(&[1.3], &data, &PerturbationSpec::uniform(e1)).unwrap();
        let large = model.exact_abc_loglik(&[1.3], &data, &PerturbationSpec::uniform(e1 * factor)).unwrap();
        prop_assert!(large >= small - 1e-10);
        prop_assert!(large <= 1e-12);
    }

    #[test]
    fn ess_is_between_one_and_n(w in prop::collection::vec(0.0f64..10.0, 1..50)) {
        prop_assume!(w.iter().any(|&v| v > 0.0));
        let ess = effective_sample_size(&w);
        prop_assert!(ess >= 1.0 - 1e-12 && ess <= w.len() as f64 + 1e-9);
    }
}

#[test]
fn vanishing_epsilon_recovers_the_plain_likelihood() {
    let model = two_state();
    let theta = ParameterVector::for_model(&model, vec![1.0]).unwrap();
    let data = simulate(&model, &theta, 60, 3).unwrap();
    let plain = forward_loglik(&model, &[0.8], &data, None).unwrap();
    let pert = forward_loglik(&model, &[0.8], &data, Some(&PerturbationSpec::uniform(1e-4))).unwrap();
    assert!((plain - pert).abs() < 1e-6, "{plain} vs {pert}");
}

#[test]
fn smc_is_unbiased_on_the_iid_model() {
    let model = ModelConfig::named("iid_pm_theta").build().unwrap();
    let data = Trajectory::observed(&[0.9, -1.2, 1.1, -0.8, 1.0, 1.3, -1.1, 0.7]).unwrap();
    let exact = iid_abc_likelihood(1.0, data.observations(), 0.35);
    let reps: Vec<f64> = (0..400)
        .map(|s| {
            let cfg = SmcConfig::new(50, 11).stream(s);
            smc_abc_likelihood(&model, &[1.0], &data, &PerturbationSpec::uniform(0.35), &cfg).unwrap().log_value.exp()
        })
        .collect();
    let m = reps.iter().sum::<f64>() / reps.len() as f64;
    let sd = (reps.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (reps.len() - 1) as f64).sqrt();
    let se = sd / (reps.len() as f64).sqrt();
    assert!((m - exact).abs() < 4.0 * se, "{m} vs {exact} (se {se})");
}

#[test]
fn truncated_support_keeps_observations_inside() {
    let model = ModelConfig::named("finite_gaussian").with_hyper(json!({"support": [-1.0, 1.0], "centers": [-0.5, 0.5]})).build().unwrap();
    let theta = ParameterVector::for_model(&model, vec![2.0]).unwrap();
    let data = simulate(&model, &theta, 2000, 8).unwrap();
    assert!(data.observations().iter().all(|y| (-1.0..=1.0).contains(y)));
}
