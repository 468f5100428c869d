//! End-to-end tests of the `sea` binary: exit-code contract, shipped
//! configs, output determinism, and the audit's ability to fail.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sea_cli::audit::{run_audit, Mutation};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sea"))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sea-cli-test-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).to_string()
}

#[test]
fn simulate_qubit_spiral_reaches_maximal_entropy() {
    let out_dir = tmp_dir("spiral");
    let output = bin()
        .args(["simulate", "--config"])
        .arg(configs_dir().join("qubit_spiral.json"))
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    let stdout = run_ok(&output);
    assert!(stdout.contains("-- audit --"), "audit block missing");
    let csv = std::fs::read_to_string(out_dir.join("spiral.csv")).unwrap();
    let last = csv.lines().last().unwrap();
    let cols: Vec<f64> = last.split(',').map(|c| c.parse().unwrap()).collect();
    // header: t, lambda_0, lambda_1, trace, energy, entropy, entropy_production
    let entropy = cols[5];
    assert!(
        (entropy - 2.0_f64.ln()).abs() < 1e-6,
        "final entropy {entropy}"
    );
    let json = std::fs::read_to_string(out_dir.join("spiral.json")).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(doc["kernel_dim_constant"], serde_json::Value::Bool(true));
}

#[test]
fn simulate_backward_classifies_boundary() {
    let out_dir = tmp_dir("backward");
    let output = bin()
        .args(["simulate", "--config"])
        .arg(configs_dir().join("qubit_backward.json"))
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    let stdout = run_ok(&output);
    assert!(
        stdout.contains("boundary-approached"),
        "missing classification: {stdout}"
    );
    // entropy decreases along the backward run
    let csv = std::fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    let first: Vec<f64> = rows[0].split(',').map(|c| c.parse().unwrap()).collect();
    let last: Vec<f64> = rows[rows.len() - 1]
        .split(',')
        .map(|c| c.parse().unwrap())
        .collect();
    assert!(last[5] < first[5]);
}

#[test]
fn simulate_rejects_invalid_initial_state_with_exit_2() {
    let out_dir = tmp_dir("badr0");
    let config = out_dir.join("bad.json");
    std::fs::write(
        &config,
        r#"{
            "model": { "kind": "qubit", "omega": 1.0, "axis": [0.0, 0.0, 1.0], "tau": 1.0 },
            "initial_state": { "constructor": "bloch", "r": [1.2, 0.0, 0.0] },
            "time": { "t_final": 1.0, "sample_every": 0.5 }
        }"#,
    )
    .unwrap();
    let output = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("not a state"), "stderr: {stderr}");
}

#[test]
fn simulate_rejects_nonpositive_tau_with_exit_2() {
    let out_dir = tmp_dir("badtau");
    let config = out_dir.join("bad_tau.json");
    std::fs::write(
        &config,
        r#"{
            "model": { "kind": "qubit", "omega": 1.0, "axis": [0.0, 0.0, 1.0], "tau": -1.0 },
            "initial_state": { "constructor": "maximally_mixed" },
            "time": { "t_final": 1.0, "sample_every": 0.5 }
        }"#,
    )
    .unwrap();
    let output = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn simulate_numerical_failure_exits_3() {
    let out_dir = tmp_dir("maxsteps");
    let config = out_dir.join("tiny_budget.json");
    std::fs::write(
        &config,
        r#"{
            "model": { "kind": "qubit", "omega": 1.0, "axis": [0.0, 0.0, 1.0], "tau": 1.0 },
            "initial_state": { "constructor": "bloch", "r": [0.5, 0.0, 0.0] },
            "time": { "t_final": 50.0, "sample_every": 1.0 },
            "integrator": { "max_steps": 3, "converge_early": false }
        }"#,
    )
    .unwrap();
    let output = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("max steps"), "stderr: {stderr}");
}

#[test]
fn simulate_output_is_deterministic() {
    let run = |tag: &str| {
        let out_dir = tmp_dir(tag);
        let output = bin()
            .args(["simulate", "--config"])
            .arg(configs_dir().join("two_qubit_correlated.json"))
            .arg("--out")
            .arg(&out_dir)
            .arg("--seed")
            .arg("42")
            .output()
            .unwrap();
        run_ok(&output);
        std::fs::read(out_dir.join("trajectory.csv")).unwrap()
    };
    assert_eq!(run("det-a"), run("det-b"), "CSV output not byte-identical");
}

#[test]
fn equilibrium_fits_beta_and_rejects_infeasible() {
    let out_dir = tmp_dir("equilibrium");
    let output = bin()
        .args(["equilibrium", "--config"])
        .arg(configs_dir().join("equilibrium_qubit.json"))
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    run_ok(&output);
    let doc: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out_dir.join("equilibrium.json")).unwrap(),
    )
    .unwrap();
    let beta = doc["beta"].as_f64().unwrap();
    assert!((beta - 3.0_f64.ln()).abs() < 1e-8, "beta {beta}");
    assert!(doc["stationarity_drift"].as_f64().unwrap() < 1e-6);

    // target mean above the largest eigenvalue of H: infeasible
    let config = out_dir.join("infeasible.json");
    std::fs::write(
        &config,
        r#"{
            "model": {
                "kind": "single",
                "hamiltonian": [[[0.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]],
                "tau": 1.0
            },
            "energy_mean": 1.5
        }"#,
    )
    .unwrap();
    let output = bin()
        .args(["equilibrium", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(4));
}

#[test]
fn onsager_report_routes_agree() {
    let out_dir = tmp_dir("onsager");
    let output = bin()
        .args(["onsager", "--config"])
        .arg(configs_dir().join("onsager_qutrit.json"))
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    run_ok(&output);
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("onsager.json")).unwrap())
            .unwrap();
    assert!(doc["max_route_deviation"].as_f64().unwrap() < 1e-7);
    assert!(doc["conductivity_max_asymmetry"].as_f64().unwrap() < 1e-12);
    assert!(doc["conductivity_min_eigenvalue"].as_f64().unwrap() > -1e-10);
    assert_eq!(doc["affinities"].as_array().unwrap().len(), 8);
}

#[test]
fn audit_passes_clean_and_catches_mutation() {
    let output = bin().args(["audit", "--seed", "9"]).output().unwrap();
    let stdout = run_ok(&output);
    assert_eq!(stdout.matches("PASS").count(), 5, "stdout: {stdout}");

    // the injected sign error must trip the monotonicity check
    let results = run_audit(9, Mutation::FlipDissipativeSign);
    let mono = results
        .iter()
        .find(|r| r.name == "entropy-monotonicity")
        .unwrap();
    assert!(!mono.passed, "mutated generator slipped through the audit");
}

#[test]
fn sweep_fans_out_configs() {
    let out_dir = tmp_dir("sweep");
    let output = bin()
        .args(["simulate", "--sweep"])
        .arg(configs_dir().join("sweep_demo.json"))
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    run_ok(&output);
    assert!(out_dir.join("qubit_spiral/spiral.csv").exists());
    assert!(out_dir.join("two_qubit_correlated/trajectory.csv").exists());
}

#[test]
fn qubit_demo_emits_bloch_columns() {
    let out_dir = tmp_dir("demo");
    let output = bin()
        .args(["qubit-demo", "--t-final", "2", "--sample-every", "0.5", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    run_ok(&output);
    let csv = std::fs::read_to_string(out_dir.join("qubit_demo.csv")).unwrap();
    assert!(csv.starts_with("t,r_x,r_y,r_z,r_abs,entropy,entropy_production"));
    assert_eq!(csv.lines().count(), 1 + 5);
}
