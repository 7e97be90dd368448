use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_homog");

fn homog(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--output-dir")
        .arg(dir)
        .env_remove("HOMOG_THREADS")
        .output()
        .unwrap()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn gamma_table_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = homog(dir.path(), &["gamma-table", "--alpha", "1", "--beta", "2", "--lambda", "0.5", "--t-steps", "101"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("gamma-table.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 101);
    assert_eq!(rows[0], vec![0.0, 1.5]);
    assert!((rows[50][1] - 0.625).abs() < 1e-15);
    assert!((rows[100][1] - 1.5).abs() < 1e-15);
    assert!(csv.starts_with("t,gamma\n"));
}

#[test]
fn non_rep_defaults_confirm() {
    let dir = tempfile::tempdir().unwrap();
    let out = homog(dir.path(), &["non-rep"]);
    assert_eq!(out.status.code(), Some(0));
    let v = read_json(&dir.path().join("non-rep.json"));
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["result"]["kind"], "non_representability");
    assert_eq!(v["result"]["verdict"], "confirmed");
    assert_eq!(v["config"]["s_grid"], serde_json::json!([0.5, 0.25]));
}

#[test]
fn degenerate_pair_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = homog(dir.path(), &["non-rep", "--s-grid", "0.3,0.7"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("s_grid"));
}

#[test]
fn inconclusive_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = homog(dir.path(), &["non-rep", "--eps-grid", "0.5"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn missing_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = homog(dir.path(), &["gamma-table", "--config", "/nonexistent/run.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--config"));
}

#[test]
fn config_diagnostics_name_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "alpha = 1.0\nbeta = \"two\"\n").unwrap();
    let out = homog(dir.path(), &["gamma-table", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr).to_string();
    assert!(err.contains("line 2") && err.contains("beta"), "{err}");

    std::fs::write(&cfg, "lambda = 1.5\n").unwrap();
    let out = homog(dir.path(), &["gamma-table", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"alpha": 3.0, "beta": 2.0, "t_steps": 3}"#).unwrap();
    let out = homog(dir.path(), &["gamma-table", "--config", cfg.to_str().unwrap(), "--alpha", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = read_json(&dir.path().join("gamma-table.json"));
    assert_eq!(v["config"]["alpha"], 1.0);
    assert_eq!(v["config"]["t_steps"], 3);
    assert_eq!(v["result"].as_array().unwrap().len(), 3);
}

#[test]
fn thread_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut c = Command::new(BIN);
        c.args(["gamma-table", "--t-steps", "3", "--output-dir"]).arg(dir.path());
        c.env_remove("HOMOG_THREADS");
        if let Some(e) = env {
            c.env("HOMOG_THREADS", e);
        }
        if let Some(f) = flag {
            c.args(["--threads", f]);
        }
        c.output().unwrap().status.code()
    };
    assert_eq!(run(Some("zero"), None), Some(1));
    assert_eq!(run(Some("zero"), Some("2")), Some(0));
    assert_eq!(run(Some("3"), None), Some(0));
}

#[test]
fn energy_command_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("u.json");
    std::fs::write(&state, r#"{"breakpoints": [0.0, 0.5], "values": [0.0, 1.0]}"#).unwrap();
    let out = homog(
        dir.path(),
        &["energy", "--state", state.to_str().unwrap(), "--eps", "0.0625", "--quadrature-n", "512"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = read_json(&dir.path().join("energy.json"));
    assert_eq!(v["result"]["exact"]["method"], "exact");
    assert!((v["result"]["exact"]["value"].as_f64().unwrap() - 0.75).abs() < 1e-12);
    let q = &v["result"]["quadrature"];
    assert!((q["value"].as_f64().unwrap() - 0.75).abs() <= q["bound"].as_f64().unwrap());

    std::fs::write(&state, r#"{"breakpoints": [0.0, 0.5], "values": [0.0, 0.5]}"#).unwrap();
    let out = homog(dir.path(), &["energy", "--state", state.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(read_json(&dir.path().join("energy.json"))["result"]["exact"]["value"], "+inf");
    let out = homog(dir.path(), &["energy", "--state", state.to_str().unwrap(), "--m", "4"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(read_json(&dir.path().join("energy.json"))["result"]["exact"]["value"].is_number());
}

#[test]
fn cell_commands() {
    let dir = tempfile::tempdir().unwrap();
    let out = homog(dir.path(), &["cell-solve", "--n", "64", "--t", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let v = read_json(&dir.path().join("cell-solve.json"));
    assert!((v["result"]["result"]["energy"].as_f64().unwrap() - 0.625).abs() < 5e-3);
    assert_eq!(v["result"]["result"]["method"], "projected_gradient");

    let out = homog(dir.path(), &["cell-solve", "--n", "16", "--t", "0.25", "--method", "brute-force"]);
    assert_eq!(out.status.code(), Some(0));

    let out = homog(dir.path(), &["cell-verify", "--brute-n", "12"]);
    assert_eq!(out.status.code(), Some(0));
    let out = homog(dir.path(), &["cell-verify", "--brute-n", "12", "--alpha", "2", "--beta", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn limit_commands() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(homog(dir.path(), &["gamma-limit"]).status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("gamma-limit.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert_eq!(homog(dir.path(), &["two-scale"]).status.code(), Some(0));
    assert_eq!(homog(dir.path(), &["fm-threshold"]).status.code(), Some(0));
    let v = read_json(&dir.path().join("fm-threshold.json"));
    assert_eq!(v["result"]["kind"], "fM_threshold");
    let out = homog(dir.path(), &["fm-threshold", "--deviations", "oscillating_lift", "--m-grid", "0.5,1"]);
    assert_eq!(out.status.code(), Some(3));
    let out = homog(dir.path(), &["fm-threshold", "--deviations", "bogus"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn outputs_do_not_depend_on_threads() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, t) in [(&a, "1"), (&b, "4")] {
        assert_eq!(homog(dir.path(), &["gamma-limit", "--threads", t]).status.code(), Some(0));
    }
    let ja = std::fs::read(a.path().join("gamma-limit.json")).unwrap();
    let jb = std::fs::read(b.path().join("gamma-limit.json")).unwrap();
    assert_eq!(ja, jb);
}
