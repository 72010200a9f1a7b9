use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fbn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fbn")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn all_pass(doc: &Value) -> bool {
    doc["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true)
}

#[test]
fn sobolev_constant_for_the_laplacian_in_three_dimensions() {
    let doc = json(&fbn(&["constants", "--N", "3", "--s", "1"]));
    let s = doc["results"]["constants"]["S"]["closed_form"].as_f64().unwrap();
    let expect = 3.0 * (std::f64::consts::PI / 2.0).powf(4.0 / 3.0);
    assert!((s / expect - 1.0).abs() < 1e-12);
    // C_{N,1} has a pole and is reported as null
    assert!(doc["results"]["constants"]["C"]["closed_form"].is_null());
    assert!(doc["results"]["constants"]["S"]["quadrature"].is_null());
    assert_eq!(doc["schema"], "fbn-cli/1");
    assert_eq!(doc["config"]["n"], 3);
    assert!(all_pass(&doc));
}

#[test]
fn exit_codes_distinguish_config_convergence_and_regime() {
    assert_eq!(fbn(&["minimize", "--N", "2", "--s", "0.5"]).status.code(), Some(4));
    assert_eq!(fbn(&["energy-scan", "--lambdas", "100"]).status.code(), Some(2));
    assert_eq!(fbn(&["constants", "--s", "0.7"]).status.code(), Some(2));
    assert_eq!(fbn(&["bubble", "--a", "wave:3"]).status.code(), Some(2));
    assert_eq!(fbn(&["druet-check"]).status.code(), Some(2));
    let stalled = fbn(&["minimize", "--a", "const:-0.5", "--v", "const:-1", "--eps", "0.1", "--lambda", "5", "--max-iter", "1"]);
    assert_eq!(stalled.status.code(), Some(3));
    assert_eq!(fbn(&[]).status.code(), Some(2));
}

#[test]
fn config_file_is_overridden_by_flags_and_embedded_in_the_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# bubble run\nx = 0.25\nlambda = 40\ns = 0.3\n").unwrap();
    let doc = json(&fbn(&["bubble", "--config", cfg.to_str().unwrap(), "--lambda", "80"]));
    assert_eq!(doc["config"]["x"], 0.25);
    assert_eq!(doc["config"]["s"], 0.3);
    assert_eq!(doc["config"]["lambda"], 80.0);
    assert!(all_pass(&doc));
    fs::write(&cfg, "colour = red\n").unwrap();
    assert_eq!(fbn(&["bubble", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn outputs_are_deterministic_and_carry_the_config() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&d1, &d2] {
        let out = fbn(&["critical-shift", "--a", "bump:0:0.3:0.4", "--h", "0.05", "--out", d.path().to_str().unwrap()]);
        assert!(out.status.success());
    }
    let read = |d: &Path, f: &str| fs::read_to_string(d.join(f)).unwrap();
    let (j1, j2) = (read(d1.path(), "critical-shift.json"), read(d2.path(), "critical-shift.json"));
    // the out path itself differs; everything else must match byte for byte
    let strip = |s: &str, d: &Path| s.replace(d.to_str().unwrap(), "OUT");
    assert_eq!(strip(&j1, d1.path()), strip(&j2, d2.path()));
    let csv = read(d1.path(), "critical-shift.csv");
    assert!(csv.starts_with("# schema: fbn-cli/1\n# config: {"));
    assert!(csv.lines().nth(2) == Some("x,phi_a"));
    let doc: Value = serde_json::from_str(&j1).unwrap();
    assert!(all_pass(&doc));
}

#[test]
fn druet_check_reads_a_profile() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.csv");
    let mut text = String::from("x,u\n");
    for k in 0..=100 {
        let x = -1.0 + 0.02 * k as f64;
        text.push_str(&format!("{x},{}\n", (1.0 - x * x).powi(2) * (1.0 + 0.5 * x)));
    }
    fs::write(&path, text).unwrap();
    let doc = json(&fbn(&["druet-check", "--u-file", path.to_str().unwrap()]));
    let r = &doc["results"];
    assert!(r["ratio"].as_f64().unwrap() < 1.0);
    assert!((r["margin"].as_f64().unwrap() + r["ratio"].as_f64().unwrap() - 1.0).abs() < 1e-15);
    assert!(r["t"].as_f64().unwrap() > 0.0 && r["y"].is_f64());
    assert!(all_pass(&doc));
    fs::write(&path, "x,u\n0,1\n").unwrap();
    assert_eq!(fbn(&["druet-check", "--u-file", path.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn report_lists_checks_and_refuses_empty_input() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let empty = fbn(&["report", "--out", d]);
    assert_eq!(empty.status.code(), Some(1));
    assert!(fs::read_dir(dir.path()).unwrap().next().is_none());
    assert!(fbn(&["constants", "--out", d]).status.success());
    assert!(fbn(&["robin", "--out", d]).status.success());
    let rep = fbn(&["report", "--out", d]);
    assert!(rep.status.success());
    let text = fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert_eq!(text, String::from_utf8(rep.stdout).unwrap());
    let gamma = text.lines().find(|l| l.contains("gamma = c*a")).unwrap();
    assert!(gamma.starts_with("constants") && gamma.ends_with("PASS"));
    assert!(text.lines().any(|l| l.starts_with("robin") && l.contains("boundary rate")));
}

#[test]
fn scaling_study_gates_surface_as_exit_codes() {
    // s = 0.45 is outside 8s/3 < N < 4s; a 2-point ladder cannot be fitted
    let out = fbn(&["minimize", "--s", "0.45", "--eps-ladder", "0.1,0.05,0.025,0.0125", "--a", "const:-0.3", "--v", "const:-1"]);
    assert_eq!(out.status.code(), Some(4));
    let short = fbn(&["minimize", "--eps-ladder", "0.1,0.05", "--a", "const:-0.3", "--v", "const:-1"]);
    assert_eq!(short.status.code(), Some(2));
}

#[test]
fn schema_documents_keys_and_columns() {
    let out = fbn(&["--schema"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for needle in ["fbn-cli/1", "eps_ladder", "u_file", "quotient_unperturbed", "w_norm", "exit codes"] {
        assert!(text.contains(needle), "{needle} missing");
    }
}

#[test]
fn quadrature_oracles_agree_with_closed_forms() {
    let doc = json(&fbn(&["constants", "--N", "2", "--s", "0.6", "--check-quadrature", "--tol", "1e-9"]));
    let a = &doc["results"]["constants"]["A"];
    assert!(a["rel_err"].as_f64().unwrap() < 1e-8);
    assert!(doc["checks"].as_array().unwrap().len() > 4);
    assert!(all_pass(&doc));
}

#[test]
fn tabulated_potential_matches_the_named_profile() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.csv");
    let mut text = String::from("x,value\n");
    for k in 0..=4000 {
        let x = -1.0 + 0.0005 * k as f64;
        text.push_str(&format!("{x},{}\n", -0.4 * (-0.5 * (x / 0.3) * (x / 0.3)).exp()));
    }
    fs::write(&path, text).unwrap();
    let shift = |args: &[&str]| json(&fbn(args))["results"]["shift"].as_f64().unwrap();
    let named = shift(&["critical-shift", "--a", "bump:0:0.3:0.4", "--h", "0.05"]);
    let tabulated = shift(&["critical-shift", "--a-file", path.to_str().unwrap(), "--h", "0.05"]);
    assert!((named - tabulated).abs() < 1e-5, "{named} vs {tabulated}");
    fs::write(&path, "x,value\n0,1\n0.5,1\n0.9,1\n").unwrap();
    assert_eq!(fbn(&["critical-shift", "--a-file", path.to_str().unwrap()]).status.code(), Some(2));
}
