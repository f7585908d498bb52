use std::process::{Command, Output};

fn ratdet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ratdet")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn logdet_csv_has_header_and_one_row() {
    let out = ratdet(&["logdet", "--n", "80", "--d", "2", "--format", "csv"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("kernel_family,n,d,jitter,algorithm"));
    assert!(lines[1].starts_with("matern52,80,2,"));
}

#[test]
fn logdet_json_reports_exact_reference_below_cutoff() {
    let out = ratdet(&["logdet", "--kernel", "rbf", "--n", "60", "--algorithm", "slq", "--format", "json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["algorithm"], "slq");
    assert_eq!(v["kernel_family"], "rbf");
    let (est, exact) = (v["estimate"].as_f64().unwrap(), v["exact"].as_f64().unwrap());
    assert!((est - exact).abs() < 0.05 * exact.abs().max(1.0), "{est} vs {exact}");
}

#[test]
fn exact_reference_is_skipped_above_cutoff() {
    let out = ratdet(&["logdet", "--n", "50", "--exact-cutoff", "10", "--format", "json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["exact"].is_null());
    assert!(v["abs_error"].is_null());
}

#[test]
fn cholesky_algorithm_matches_exact() {
    let out = ratdet(&["logdet", "--n", "40", "--algorithm", "exact", "--format", "json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["estimate"], v["exact"]);
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(ratdet(&["logdet", "--kernel", "cauchy"]).status.code(), Some(2));
    assert_eq!(ratdet(&["bench", "--jobs", "0"]).status.code(), Some(2));
    assert_eq!(ratdet(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn estimator_failures_exit_with_one() {
    let out = ratdet(&["logdet", "--n", "0"]);
    assert_eq!(out.status.code(), Some(1));
    let out = ratdet(&["logdet", "--n", "30", "--jitter=-1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bench_writes_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let json_path = dir.path().join("out.json");
    let out = ratdet(&[
        "bench", "--sweep", "probes", "--values", "5,10", "--n", "40", "--trials", "2", "--algorithms", "r1,slq",
        "--out", json_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Vec<serde_json::Value> = serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_eq!(v.len(), 8);
    assert_eq!(v[0]["s"], 5);
    assert_eq!(v[7]["s"], 10);

    let csv_path = dir.path().join("out.csv");
    let out = ratdet(&[
        "bench", "--sweep", "precond", "--values", "identity,diagonal", "--n", "40", "--trials", "1",
        "--algorithms", "r3", "--out", csv_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv_path).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.contains(",identity,") && text.contains(",diagonal,"));
}

#[test]
fn bench_rejects_bad_sweep_value() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.csv");
    let out = ratdet(&["bench", "--sweep", "n", "--values", "ten", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_passes() {
    let out = ratdet(&["verify"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.lines().all(|l| l.starts_with("[PASS]")), "{text}");
}
