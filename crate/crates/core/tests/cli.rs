//! End-to-end runs of the `degenhom` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(cmd: &str, config: &str, dir: &Path, extra: &[&str]) -> Output {
    let cfg = dir.join(format!("{cmd}.json"));
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_degenhom"))
        .arg(cmd)
        .arg(&cfg)
        .arg("--out-dir")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("# schema=degenhom-csv/1 config_sha256="), "{header}");
    assert_eq!(header.len(), "# schema=degenhom-csv/1 config_sha256=".len() + 64);
    lines.skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn layered_fixture_reproduces_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("layered-verify", r#"{"layers": [1, 4], "k": 2, "solver": {"tol": 1e-12}}"#, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("out/layered.csv"));
    let value = |dir: &str| rows.iter().find(|r| r[0] == dir).unwrap()[3].parse::<f64>().unwrap();
    assert!((value("e1") - 1.6).abs() < 1e-12);
    assert!((value("e2") - 2.5).abs() < 1e-12);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["command"], "layered-verify");
}

#[test]
fn moments_of_two_point_weights() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"environment": {"dist": [{"kind": "two-point", "v1": 1, "v2": 4, "prob": 0.5}]},
                  "exponents": {"alpha": 1, "beta": 1}}"#;
    let out = run("moments", cfg, dir.path(), &["--samples", "20000"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("out/moments.csv")).unwrap();
    let header: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let row: Vec<&str> = text.lines().nth(2).unwrap().split(',').collect();
    let col = |name: &str| row[header.iter().position(|h| *h == name).unwrap()].parse::<f64>().unwrap();
    // 𝔼[λ] = 2.5 and 𝔼[λ⁻¹] = 0.625, within five standard errors
    assert!((col("alpha_moment") - 2.5).abs() < 5.0 * 1.5 / 20000f64.sqrt());
    assert!((col("beta_moment") - 0.625).abs() < 5.0 * 0.375 / 20000f64.sqrt());
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("cell", r#"{"F": [[1, 0]], "unknown": 3}"#, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));

    let degenerate = r#"{"F": [[1, 0]], "environment": {"dist": [{"kind": "pareto-inverse", "a": 1.0}]},
                         "exponents": {"alpha": 1, "beta": 1}}"#;
    let out = run("homogenize", degenerate, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("moment condition"));

    let out = run("poincare", r#"{"exponents": {"q": 2, "alpha": 1.01, "beta": 1}}"#, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Poincaré exponents"));
}

#[test]
fn failed_check_exits_4_after_writing_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"exponents": {"q": 2, "alpha": 2, "beta": 2}, "trials": 8, "c_bound": 1e-9,
                  "environment": {"dist": [{"kind": "lognormal", "mu": 0, "sigma": 0.5}]}}"#;
    let out = run("poincare", cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(4));
    assert!(dir.path().join("out/poincare.csv").exists());
    assert!(dir.path().join("out/summary.json").exists());
}

#[test]
fn runs_are_deterministic_across_thread_counts() {
    let cfg = r#"{"F": [[1, 0.5]], "k_schedule": [2, 4], "samples": 3,
                  "environment": {"dist": [{"kind": "uniform", "lo": 0.5, "hi": 2}]}}"#;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run("homogenize", cfg, a.path(), &["--seed", "3"]);
    let rb = run("homogenize", cfg, b.path(), &["--seed", "3", "--threads", "1"]);
    assert_eq!(ra.status.code(), Some(0), "{}", String::from_utf8_lossy(&ra.stderr));
    assert_eq!(rb.status.code(), Some(0));
    for name in ["whom_rows.csv", "whom_levels.csv", "summary.json"] {
        assert_eq!(fs::read(a.path().join("out").join(name)).unwrap(), fs::read(b.path().join("out").join(name)).unwrap());
    }
    let c = tempfile::tempdir().unwrap();
    run("homogenize", cfg, c.path(), &["--seed", "4"]);
    assert_ne!(fs::read(a.path().join("out/whom_rows.csv")).unwrap(), fs::read(c.path().join("out/whom_rows.csv")).unwrap());
}

#[test]
fn mu_writes_path_families() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"potential": {"family": "weighted_p_power", "p": 2},
                  "environment": {"dist": [{"kind": "uniform", "lo": 0.5, "hi": 2}]},
                  "exponents": {"beta": 1, "gamma": 1}, "samples": 200}"#;
    let out = run("mu", cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let paths: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/paths.json")).unwrap()).unwrap();
    assert_eq!(paths.as_array().unwrap().len(), 2);
    assert_eq!(paths[0]["paths"].as_array().unwrap().len(), 4);
    assert!(dir.path().join("out/mu_moment.csv").exists());
}
