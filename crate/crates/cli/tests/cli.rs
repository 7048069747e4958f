use std::process::{Command, Output};

fn amp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amp"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn psi_with_zero_threshold_is_linear() {
    let v = json(&amp(&["se", "psi", "--sigma2", "0.6", "--theta", "0", "--delta", "0.4", "--v", "0.1"]));
    assert!((v["psi"].as_f64().unwrap() - (0.1 + 0.6 / 0.4)).abs() < 1e-12);
}

#[test]
fn rho_se_is_inside_unit_interval() {
    let v = json(&amp(&["se", "rho-se", "--delta", "0.5"]));
    let text = v.to_string();
    assert!(text.contains("rho"), "{text}");
}

#[test]
fn lasso_reports_certificate() {
    let v = json(&amp(&["lasso", "--lambda", "0.05", "--n", "100"]));
    assert!(v["kkt_residual"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn observables_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = amp(&["observables", "--n", "200", "--instances", "2", "--max-iters", "4", "--sequential", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("observables.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("observables_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["n"], 200);
    assert_eq!(manifest["config"]["parallelism"], "sequential");
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("pt.toml");
    std::fs::write(&cfg, "n = 100\ninstances = 2\ndeltas = [0.5]\nrhos = [0.06, 0.9]\nmax_iters = 50\n").unwrap();
    let out = dir.path().join("res");
    let o = amp(&[
        "phase-transition",
        "--config",
        cfg.to_str().unwrap(),
        "--instances",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cells = std::fs::read_to_string(out.join("phase_transition.csv")).unwrap();
    // 2 rhos x 2 algorithms
    assert_eq!(cells.lines().count(), 1 + 4);
    assert!(cells.lines().nth(1).unwrap().contains(",3,"));
}

#[test]
fn bad_input_fails_cleanly() {
    assert!(!amp(&["observables", "--n", "0"]).status.success());
    assert!(!amp(&["se", "rho-se", "--delta", "1.5"]).status.success());
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "no_such_key = 1\n").unwrap();
    assert!(!amp(&["observables", "--config", cfg.to_str().unwrap()]).status.success());
}
