use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pgk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pgk"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn small_energy(stem: &Path) -> Output {
    pgk(&[
        "learn-energy",
        "--sweep",
        "300,600,1200",
        "--runs",
        "2",
        "--grid",
        "120",
        "--seed",
        "7",
        "-o",
        stem.to_str().unwrap(),
    ])
}

#[test]
fn energy_outputs_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a/energy");
    let b = dir.path().join("b/energy");
    assert!(small_energy(&a).status.success());
    assert!(small_energy(&b).status.success());

    let rows = fs::read_to_string(a.with_extension("csv")).unwrap();
    assert!(rows.starts_with("N,run_id,sup_error,trace_max_dev,seed\n"));
    assert_eq!(rows.lines().count(), 1 + 3 * 2);
    assert_eq!(rows, fs::read_to_string(b.with_extension("csv")).unwrap());

    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.with_extension("json")).unwrap()).unwrap();
    assert!(sidecar["fit"]["slope"].is_f64());
    assert_eq!(sidecar["config"]["task"], "energy");
    assert_eq!(sidecar["config"]["seed"], 7);
    assert_eq!(sidecar["summary"].as_array().unwrap().len(), 3);

    let curve = fs::read_to_string(dir.path().join("a/energy.curve.csv")).unwrap();
    assert!(curve.starts_with("x,truth,prediction\n"));
    assert_eq!(curve.lines().count(), 121);
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "task": "correlation",
        "kernel": { "kind": "fejer", "lambda": 20 },
        "m": 2,
        "side": 3.0,
        "axes": [
            { "range": [-1.5, 1.5], "map": "linear" },
            { "range": [0.0, 1.0], "map": "mirror" }
        ],
        "model": { "n": 5, "j": 1.0, "gamma": 0.3333333333333333 },
        "sweep": [200, 400, 800],
        "runs": 5,
        "grid": 40,
        "seed": 3
    });
    let path = dir.path().join("cfg.json");
    fs::write(&path, cfg.to_string()).unwrap();
    let stem = dir.path().join("out");
    let o = pgk(&[
        "scaling",
        "--config",
        path.to_str().unwrap(),
        "--runs",
        "1",
        "-o",
        stem.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = fs::read_to_string(stem.with_extension("csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 3);
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(stem.with_extension("json")).unwrap()).unwrap();
    assert_eq!(sidecar["config"]["runs"], 1);
    assert_eq!(sidecar["config"]["kernel"]["lambda"], 20);

    // A config for another task is refused by the task-specific subcommand.
    let o = pgk(&["learn-energy", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(
        pgk(&["scaling", "--config", bad.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(pgk(&["scaling"]).status.code(), Some(2));
    assert_eq!(pgk(&["learn-energy", "--runs", "0"]).status.code(), Some(2));
    assert_eq!(
        pgk(&["learn-energy", "--kernel", "dirichlet"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        pgk(&["learn-density", "--qubits", "9"]).status.code(),
        Some(2)
    );
    assert_eq!(
        pgk(&["learn-energy", "--no-such-flag"]).status.code(),
        Some(2)
    );
    assert_eq!(
        pgk(&["complexity", "--epsilon", "-1"]).status.code(),
        Some(2)
    );
}

#[test]
fn complexity_table_and_check() {
    let o = pgk(&["complexity", "--check"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("log10 ratio fejer"));
    assert!(text.contains("-47.5"));
    assert!(text.contains("-60.5"));
    // At epsilon = 0.2 the Fejer bound no longer beats the prior one.
    assert_eq!(
        pgk(&["complexity", "--epsilon", "0.2", "--check"])
            .status
            .code(),
        Some(3)
    );
    let json: serde_json::Value =
        serde_json::from_str(&stdout(&pgk(&["complexity", "--json"]))).unwrap();
    assert!(json["ratio_fejer"]["log10"].as_f64().unwrap() < -45.0);
}

#[test]
fn verify_kernels_check() {
    let o = pgk(&["verify-kernels", "--lambdas", "8,32", "--check"]);
    assert!(o.status.success());
    let lines: Vec<serde_json::Value> = stdout(&o)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert!(lines.iter().all(|l| l["report"]["passed"] == true));
    assert!(pgk(&[
        "verify-kernels",
        "--kernel",
        "gaussian",
        "--m",
        "2",
        "--check"
    ])
    .status
    .success());
    let d = pgk(&[
        "verify-kernels",
        "--kernel",
        "dirichlet",
        "--lambdas",
        "8",
        "--check",
    ]);
    assert!(d.status.success());
    assert!(stdout(&d).contains("\"passed\":false"));
}

#[test]
fn check_failure_exits_3() {
    // 200 samples are far too few for the 0.02 correlation threshold.
    let o = pgk(&[
        "learn-correlation",
        "--sweep",
        "200",
        "--runs",
        "1",
        "--grid",
        "50",
        "--check",
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn density_and_rkhs() {
    let o = pgk(&[
        "learn-density",
        "--sweep",
        "300,3000",
        "--runs",
        "2",
        "--grid",
        "40",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = pgk(&[
        "rkhs-bound",
        "--runs",
        "2",
        "--n-train",
        "2000",
        "--test-points",
        "200",
        "--check",
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("appendix"));
}
