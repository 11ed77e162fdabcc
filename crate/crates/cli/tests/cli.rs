use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn qsl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsl"))
        .args(args)
        .output()
        .expect("qsl runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> Value {
    assert_eq!(
        code(out),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json output")
}

fn bound_value(reports: &Value, name: &str) -> f64 {
    reports
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["name"] == name)
        .unwrap_or_else(|| panic!("no {name} report"))["value"]
        .as_f64()
        .unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

/// Parses `qsl` CSV output into the comment, the header and the rows.
fn csv(text: &str) -> (String, Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let comment = lines.next().unwrap().to_string();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (comment, header, rows)
}

#[test]
fn grover_bounds_for_two_qubits() {
    let r = json(&qsl(&["bound", "--model", "grover", "--n", "2"]));
    assert!((bound_value(&r, "schedule_independent") - 2.3094).abs() < 1e-4);
    assert!((bound_value(&r, "grover") - 2.3094).abs() < 1e-4);
    let values: Vec<f64> = r
        .as_array()
        .unwrap()
        .iter()
        .map(|b| b["value"].as_f64().unwrap())
        .collect();
    assert!(values.windows(2).all(|w| w[0] >= w[1]), "sorted descending");
}

#[test]
fn grover_bound_column_for_ten_items() {
    let out = qsl(&["bound", "--model", "grover", "--d", "10", "--format", "csv"]);
    assert_eq!(code(&out), 0);
    let (comment, header, rows) = csv(&stdout(&out));
    assert!(comment.starts_with("# seed=0 config_sha256="));
    assert_eq!(header[..2], ["name".to_string(), "value".to_string()]);
    let row = rows
        .iter()
        .find(|r| r[0] == "schedule_independent")
        .unwrap();
    assert!((row[1].parse::<f64>().unwrap() - 3.898).abs() < 1e-3);
}

#[test]
fn perturbed_pspin_closed_form_matches_commutator() {
    let r = json(&qsl(&[
        "bound",
        "--model",
        "perturbed-pspin",
        "--n",
        "4",
        "--p",
        "2",
        "--lambda",
        "1",
    ]));
    let closed = bound_value(&r, "pspin_closed_form");
    assert!((closed - 2.8284).abs() < 1e-4);
    assert!((bound_value(&r, "commutator") - closed).abs() < 1e-9);
}

#[test]
fn spin_graph_without_edges_is_rejected() {
    let dir = TempDir::new().unwrap();
    let g = write(&dir, "g.json", r#"{"n": 3, "edges": []}"#);
    let out = qsl(&["bound", "--model", "spin-graph", "--graph", &g]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no edges"));
}

#[test]
fn malformed_graph_file_names_the_file() {
    let dir = TempDir::new().unwrap();
    let g = write(&dir, "bad.json", "{\"n\": 3,\n \"edges\": [oops]}");
    let out = qsl(&["bound", "--model", "spin-graph", "--graph", &g]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json") && err.contains("line 2"), "{err}");
}

#[test]
fn schedule_enables_variance_bound_and_simulation() {
    let dir = TempDir::new().unwrap();
    let s = write(
        &dir,
        "s.json",
        r#"{"segments": [{"dt": 1.0, "f": 0.2, "g": 1.0}, {"dt": 1.5, "f": 1.0, "g": 0.3}], "f_cap": 1.0, "g_cap": 1.0}"#,
    );
    let r = json(&qsl(&[
        "bound",
        "--model",
        "grover",
        "--n",
        "2",
        "--schedule",
        &s,
    ]));
    assert!(bound_value(&r, "variance") > 0.0);
    let sim = json(&qsl(&[
        "simulate",
        "--model",
        "grover",
        "--n",
        "2",
        "--schedule",
        &s,
    ]));
    let f = sim["fidelity"].as_f64().unwrap();
    assert!((0.0..=1.0 + 1e-12).contains(&f));
    assert!((sim["time"].as_f64().unwrap() - 2.5).abs() < 1e-12);
    // T = 2.5 is above the bound, so no constraint, but the fidelity must match epsilon.
    assert!((sim["epsilon"].as_f64().unwrap() - (1.0 - f)).abs() < 1e-15);
}

#[test]
fn optimized_angles_round_trip_through_simulate_and_depth_check() {
    let dir = TempDir::new().unwrap();
    let res = dir.path().join("opt.json");
    let res_s = res.to_str().unwrap();
    let problem = ["--model", "perturbed-pspin", "--n", "3", "--p", "2"];
    let mut args = vec![
        "optimize",
        "--layers",
        "3",
        "--restarts",
        "2",
        "--seed",
        "11",
        "--out",
        res_s,
    ];
    args.extend(problem);
    let out = qsl(&args);
    assert!(
        matches!(code(&out), 0 | 2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let result: Value = serde_json::from_str(&fs::read_to_string(&res).unwrap()).unwrap();
    assert_eq!(result["seed"], 11);
    let angles = write(
        &dir,
        "angles.json",
        &result["best_parameters"]["angles"].to_string(),
    );

    let mut args = vec!["simulate", "--angles", angles.as_str()];
    args.extend(problem);
    let sim = json(&qsl(&args));
    assert!(
        (sim["fidelity"].as_f64().unwrap() - result["best_fidelity"].as_f64().unwrap()).abs()
            < 1e-9
    );
    assert_eq!(sim["depth"], 3);

    let mut args = vec!["qaoa-depth", "--angles", angles.as_str()];
    args.extend(problem);
    let cert = json(&qsl(&args));
    assert_eq!(cert["certificate"], 1);
    assert_eq!(cert["satisfied"], true);
}

#[test]
fn qaoa_layer_zero_is_a_usage_error() {
    let out = qsl(&[
        "optimize", "--model", "pspin", "--n", "3", "--p", "2", "--layers", "0",
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn grover_sweep_reaches_target_at_long_times() {
    let args = [
        "sweep-grover",
        "--d",
        "4",
        "--times",
        "1,10",
        "--restarts",
        "4",
        "--segments",
        "40",
        "--seed",
        "3",
    ];
    let out = qsl(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let (comment, header, rows) = csv(&text);
    assert!(comment.starts_with("# seed=3 config_sha256=") && comment.contains("version="));
    assert_eq!(
        header,
        ["d", "g_max", "T", "epsilon_avg", "bound_value", "flag"]
    );
    assert_eq!(rows.len(), 2);
    let long = rows.iter().find(|r| r[2] == "10.0").unwrap();
    assert!(long[3].parse::<f64>().unwrap() < 0.01);
    assert!(long[5].is_empty());
    // Below the bound the target cannot be reached.
    let short = rows.iter().find(|r| r[2] == "1.0").unwrap();
    assert!(short[3].parse::<f64>().unwrap() > 0.01);

    assert_eq!(stdout(&qsl(&args)), text, "same seed, same output");
}

#[test]
fn sweep_json_output_carries_provenance() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("sweep.json");
    let out = qsl(&[
        "sweep-grover",
        "--d",
        "4",
        "--times",
        "3",
        "--restarts",
        "2",
        "--segments",
        "20",
        "--aggregate",
        "best",
        "--format",
        "json",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let doc: Value = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(doc["seed"], 0);
    assert_eq!(doc["config_sha256"].as_str().unwrap().len(), 64);
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0]["epsilon_best"].as_f64().is_some());
}

#[test]
fn pspin_sweep_rejects_zero_lambda() {
    let out = qsl(&["sweep-pspin", "--lambda", "0", "--spins", "4"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda"));
}

#[test]
fn pspin_sweep_small_instance() {
    let out = qsl(&[
        "sweep-pspin",
        "--p",
        "2",
        "--spins",
        "3",
        "--restarts",
        "4",
        "--max-depth",
        "6",
        "--seed",
        "2",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (_, header, rows) = csv(&stdout(&out));
    assert_eq!(
        header,
        ["p", "total_spins", "T_star", "bound_value", "depth"]
    );
    let t_star: f64 = rows[0][2].parse().unwrap();
    let bound: f64 = rows[0][3].parse().unwrap();
    assert!((bound - 2.0 / 2f64.sqrt()).abs() < 1e-12);
    assert!(t_star >= bound);
}

#[test]
fn verify_suites() {
    let r = json(&qsl(&[
        "verify",
        "--suite",
        "closed-form",
        "--trials",
        "5",
        "--seed",
        "9",
    ]));
    assert_eq!(
        (
            r["passed"].as_bool(),
            r["trials"].as_u64(),
            r["seed"].as_u64()
        ),
        (Some(true), Some(5), Some(9))
    );
    assert_eq!(code(&qsl(&["verify", "--suite", "nope"])), 1);
    assert_eq!(
        code(&qsl(&["verify", "--suite", "unitarity", "--trials", "0"])),
        1
    );
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "exp.json",
        r#"{"problem": {"model": "grover", "d": 8}, "f_max": 2.0, "g_max": 2.0, "optimizer": {"seed": 5}}"#,
    );
    let from_file = json(&qsl(&["bound", "--config", &cfg]));
    let q: f64 = 1.0 / 8.0;
    let expected = (2.0 * (1.0 - q.sqrt())).sqrt() / (2.0 * (q - q * q).sqrt());
    assert!((bound_value(&from_file, "grover") - expected).abs() < 1e-12);

    let out = qsl(&[
        "bound", "--config", &cfg, "--g-max", "1", "--seed", "6", "--format", "csv",
    ]);
    let (comment, _, rows) = csv(&stdout(&out));
    assert!(comment.starts_with("# seed=6 "));
    let grover: f64 = rows.iter().find(|r| r[0] == "grover").unwrap()[1]
        .parse()
        .unwrap();
    assert!((grover - 2.0 * expected).abs() < 1e-12);
}

#[test]
fn unknown_config_field_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "exp.json", r#"{"optimizer": {"restart": 3}}"#);
    assert_eq!(
        code(&qsl(&[
            "bound", "--config", &cfg, "--model", "grover", "--n", "2"
        ])),
        1
    );
    assert_eq!(
        code(&qsl(&["bound", "--config", "/nonexistent/exp.json"])),
        1
    );
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(code(&qsl(&["--help"])), 0);
    assert_eq!(code(&qsl(&["--version"])), 0);
    assert_eq!(code(&qsl(&[])), 1);
    assert_eq!(code(&qsl(&["frobnicate"])), 1);
    assert_eq!(
        code(&qsl(&[
            "optimize",
            "--model",
            "grover",
            "--n",
            "2",
            "--unconstrained-f",
            "--layers",
            "2"
        ])),
        1
    );
    assert_eq!(
        code(&qsl(&["bound", "--n", "2"])),
        1,
        "problem flags need a model"
    );
    assert_eq!(code(&qsl(&["bound"])), 1, "no problem at all");
    assert_eq!(
        code(&qsl(&[
            "bound",
            "--model",
            "grover",
            "--n",
            "2",
            "--threshold",
            "1.5"
        ])),
        1
    );
}

#[test]
fn output_path_in_missing_directory_fails_cleanly() {
    let out = qsl(&[
        "bound",
        "--model",
        "grover",
        "--n",
        "2",
        "--out",
        "/nonexistent/dir/out.json",
    ]);
    assert_eq!(code(&out), 1);
    assert!(!Path::new("/nonexistent/dir/out.json").exists());
}
