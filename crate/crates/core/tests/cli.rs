use abc_hmm::cli::run_cli_with;
use serde_json::Value;
use std::path::Path;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run_cli_with(std::iter::once("abc-hmm").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn estimate_reproduces_the_pathology_through_the_oracle() {
    let (code, out, err) = run(&[
        "estimate", "--method", "abc", "--model", "iid_pm_theta", "--theta-star", "1.0", "--epsilon", "1.5", "--n", "100",
        "--seed", "7",
    ]);
    assert_eq!(code, 0, "{err}");
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["theta_hat"][0].as_f64(), Some(0.0));
    assert_eq!(v["settings"]["backend"]["kind"], "oracle");
}

#[test]
fn huge_epsilon_accepts_everything() {
    let (code, out, err) = run(&[
        "likelihood", "--model", "finite_gaussian", "--hyper", r#"{"support": [-3, 3]}"#, "--theta-star", "1", "--n", "30",
        "--epsilon", "1e9", "--seed", "2",
    ]);
    assert_eq!(code, 0, "{err}");
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["log_value"].as_f64(), Some(0.0));
    assert!(v["collapsed_at"].is_null());
}

#[test]
fn collapse_is_reported_as_minus_infinity() {
    let (code, out, _) = run(&[
        "likelihood", "--model", "iid_pm_theta", "--theta-star", "1", "--theta", "2.5", "--n", "10", "--epsilon", "0.1",
        "--particles", "50", "--seed", "2",
    ]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["log_value"], "-inf");
    assert_eq!(v["collapsed_at"].as_u64(), Some(1));
}

#[test]
fn simulate_then_estimate_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("traj.csv");
    let csv_s = csv.to_str().unwrap();
    let (code, _, err) = run(&["simulate", "--theta-star", "1.0", "--n", "300", "--seed", "4", "--out", csv_s]);
    assert_eq!(code, 0, "{err}");
    assert!(dir.path().join("traj.json").exists());
    let out_dir = dir.path().join("est");
    let (code, out, err) = run(&[
        "estimate", "--method", "exact_mle", "--data", csv_s, "--epsilon", "0", "--seed", "1", "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let v: Value = serde_json::from_str(&out).unwrap();
    assert!((v["theta_hat"][0].as_f64().unwrap() - 1.0).abs() < 0.3);
    let trace = std::fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    assert!(trace.starts_with("theta_1,value,se\n"));
}

#[test]
fn noisy_abc_refuses_conflicting_noise() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("noisy.csv");
    let csv_s = csv.to_str().unwrap();
    let (code, _, _) = run(&["simulate", "--theta-star", "1", "--n", "50", "--seed", "4", "--noise-epsilon", "0.5", "--out", csv_s]);
    assert_eq!(code, 0);
    let (code, _, err) = run(&["estimate", "--method", "noisy_abc", "--data", csv_s, "--epsilon", "0.3", "--seed", "1"]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn config_errors_exit_2_and_name_the_key() {
    let cases: [(&[&str], &str); 4] = [
        (&["experiment", "--preset", "consistency"], "seed"),
        (&["experiment", "--preset", "bogus", "--seed", "1"], "experiment"),
        (&["likelihood", "--model", "finite_gaussian", "--hyper", r#"{"centres": [0, 1]}"#, "--theta-star", "1", "--epsilon", "1", "--seed", "1"], "hyper.centres"),
        (&["estimate", "--method", "abc", "--kernel", "gaussian", "--theta-star", "1", "--epsilon", "1", "--seed", "1"], "kernel"),
    ];
    for (args, key) in cases {
        let (code, _, err) = run(args);
        assert_eq!(code, 2, "{args:?}: {err}");
        assert!(err.contains(&format!("`{key}`")), "{args:?}: {err}");
    }
}

#[test]
fn estimation_failure_exits_1() {
    // data are ±2.9 and no grid point lies within 0.001 of 2.9, so every candidate collapses
    let (code, _, err) = run(&[
        "estimate", "--method", "abc", "--model", "iid_pm_theta", "--theta-star", "2.9", "--n", "5", "--epsilon", "0.001",
        "--backend", "smc", "--particles", "20", "--optimizer", "grid:1", "--seed", "3",
    ]);
    assert_eq!(code, 1, "{err}");
    assert!(err.contains("estimation failed"));
}

fn read_dir_sorted(p: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(p).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    v.sort();
    v
}

#[test]
fn experiment_reruns_are_byte_identical_and_versioned() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"experiment": "bias_curve", "n": 300, "replicates": 4, "epsilons": [0.1, 0.4]}"#).unwrap();
    let out = dir.path().join("runs");
    let args = [
        "experiment", "--config", cfg.to_str().unwrap(), "--seed", "7", "--output-dir", out.to_str().unwrap(), "--plot",
    ];
    assert_eq!(run(&args).0, 0);
    let (code, stdout, err) = run(&args);
    assert_eq!(code, 0, "{err}");
    assert_eq!(read_dir_sorted(&out), ["run-001", "run-002"]);
    for f in ["bias_curve.csv", "estimates.csv", "bias_curve.json"] {
        assert_eq!(
            std::fs::read(out.join("run-001").join(f)).unwrap(),
            std::fs::read(out.join("run-002").join(f)).unwrap(),
            "{f}"
        );
    }
    assert!(out.join("run-002/bias_curve.gp").exists());
    let manifest: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(manifest["schema"], "manifest/1");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    // the copied config alone reproduces the run
    let copy = out.join("run-002/config.json");
    let (code, _, err) = run(&["experiment", "--config", copy.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(
        std::fs::read(out.join("run-001/bias_curve.csv")).unwrap(),
        std::fs::read(out.join("run-003/bias_curve.csv")).unwrap()
    );
}

#[test]
fn fisher_subcommand_writes_a_curve() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("loss.csv");
    let (code, _, err) = run(&[
        "fisher", "--theta", "1", "--epsilons", "0.1,0.5", "--n", "300", "--replicates", "4", "--seed", "3", "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 3);
    let (code, out, _) = run(&["fisher", "--theta", "1", "--n", "300", "--replicates", "4", "--seed", "3"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert!(v["matrix"][0][0].as_f64().unwrap() > 0.0);
}
