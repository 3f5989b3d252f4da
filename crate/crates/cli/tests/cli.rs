use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn curvlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curvlab")).args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> (Value, i32) {
    let out = curvlab(args);
    let code = out.status.code().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    let value = serde_json::from_str(&text).unwrap_or_else(|e| panic!("{}: {}\n{}", e, text, String::from_utf8_lossy(&out.stderr)));
    (value, code)
}

fn fixture(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "fixtures", name].iter().collect();
    format!("file:{}", p.display())
}

fn c(v: &Value) -> (f64, f64) {
    (v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

#[test]
fn flat_curvature_is_zero() {
    let (r, code) = json(&["curvature", "--metric", "builtin:flat(2)", "--points", "0,0"]);
    assert_eq!(code, 0);
    let p = &r["results"][0];
    for key in ["torsion", "curvature", "ric1", "ric2", "q2"] {
        let text = p[key].to_string();
        assert!(text.chars().all(|ch| "[]0., ".contains(ch)), "{} = {}", key, text);
    }
    assert_eq!(r["scheme"]["h"], 0.001);
    assert_eq!(r["scheme"]["order"], 4);
}

#[test]
fn example22_torsion_entry() {
    let (r, code) = json(&["curvature", "--metric", "builtin:example22", "--points", "0,0"]);
    assert_eq!(code, 0);
    let t = c(&r["results"][0]["torsion"][0][1][0]);
    assert!((t.0 - 2.0).abs() < 1e-6 && t.1.abs() < 1e-6, "{:?}", t);
    let rr = c(&r["results"][0]["curvature"][0][0][1][1]);
    assert!((rr.0 - 0.5).abs() < 1e-6, "{:?}", rr);
}

#[test]
fn hopf_file_is_pluriclosed() {
    let (r, code) = json(&["curvature", "--metric", &fixture("hopf.json"), "--check", "pluriclosed", "--points", "1,0"]);
    assert_eq!(code, 0);
    let res = &r["results"][0]["residuals"];
    assert!(res["pluriclosed_direct"].as_f64().unwrap() <= 1e-6);
    assert!(res["pluriclosed_symmetry"].as_f64().unwrap() <= 1e-6);
    assert_eq!(r["config"]["metric"]["label"], "hopf");
}

#[test]
fn normal_coordinates_check_on_disk() {
    let (r, code) = json(&["curvature", "--metric", "builtin:poincare_polydisk(1)", "--check", "normal,bianchi", "--points", "0.3"]);
    assert_eq!(code, 0);
    let res = &r["results"][0]["residuals"]["normal_coordinates"];
    assert!(res.as_array().unwrap().iter().all(|v| v.as_f64().unwrap() <= 1e-6), "{}", res);
}

#[test]
fn gauduchon_round_trip_table() {
    let (r, code) = json(&["gauduchon", "--metric", "builtin:example22", "--t", "-1,0.25,2", "--roundtrip", "--tau", "0.7"]);
    assert_eq!(code, 0);
    let rows = r["results"][0]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for row in rows {
        for key in ["roundtrip_residual", "ric_tau_residual", "rbc_tau_residual"] {
            assert!(row[key].as_f64().unwrap() <= 1e-9, "{} {}", key, row);
        }
    }
}

#[test]
fn gauduchon_pole_is_config_error() {
    assert_eq!(curvlab(&["gauduchon", "--t", "0.5"]).status.code(), Some(2));
}

#[test]
fn schwarz_identity_into_example22() {
    let (r, code) = json(&[
        "schwarz", "--map", "id", "--source", "builtin:poincare_polydisk(2)", "--target", "builtin:example22", "--points",
        "0.1,0.1", "--tau", "1",
    ]);
    assert_eq!(code, 0);
    let s = &r["results"][0]["report"];
    assert!(s["relative_error"].as_f64().unwrap() <= 1e-4);
    assert!(s["skew_torsion_residual"].as_f64().unwrap() <= 1e-8);
    assert!(r["results"][0]["bismut"]["margin"].as_f64().unwrap() >= -1e-6);
}

#[test]
fn schwarz_disk_equality_case() {
    let (r, code) = json(&[
        "schwarz", "--metric", "builtin:poincare_polydisk(1)", "--points", "0.2;-0.4+0.1i", "--constants", "2,0,2,1",
        "--invariance", "-1,0,1",
    ]);
    assert_eq!(code, 0);
    for p in r["results"].as_array().unwrap() {
        assert!((p["report"]["energy"].as_f64().unwrap() - 1.0).abs() < 1e-9);
        assert!(p["inequality_slack"].as_f64().unwrap().abs() <= 1e-6);
        assert!(p["connection_invariance_residual"].as_f64().unwrap() <= 1e-8);
    }
}

#[test]
fn flow_flat_matches_exponential() {
    let out = curvlab(&["flow", "--metric", "builtin:flat(1)", "--tau", "1", "--dt", "0.01", "--steps", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    let header = rdr.headers().unwrap().clone();
    let col = header.iter().position(|h| h == "center_g11").unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 11);
    let g: f64 = rows[10][col].parse().unwrap();
    assert!((g - (-0.1f64).exp()).abs() < 1e-4, "{}", g);
}

#[test]
fn flow_rejected_step_is_numerical_failure() {
    let out = curvlab(&["flow", "--metric", "builtin:flat(1)", "--dt", "1000", "--steps", "1"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn scan_poincare_product_hsc() {
    let (r, code) = json(&["scan", "--metric", "builtin:poincare_polydisk(2)", "--points", "0,0"]);
    assert_eq!(code, 0);
    let sup = r["results"][0]["certificate"]["value"].as_f64().unwrap();
    let inf = r["results"][1]["certificate"]["value"].as_f64().unwrap();
    assert!((sup + 1.0).abs() < 1e-3 && (inf + 2.0).abs() < 1e-3, "{} {}", sup, inf);
}

#[test]
fn scan_flat_is_zero() {
    let (r, code) = json(&["scan", "--metric", "builtin:flat(2)", "--functional", "rbc_tau", "--tau", "0.5", "--starts", "8"]);
    assert_eq!(code, 0);
    for cert in r["results"].as_array().unwrap() {
        assert!(cert["certificate"]["value"].as_f64().unwrap().abs() < 1e-12);
    }
}

#[test]
fn scan_pluriclosed_gap_on_hopf() {
    let (r, code) = json(&[
        "scan", "--metric", "builtin:hopf(2)", "--functional", "pluriclosed_gap", "--kind", "sup", "--region", "metric",
        "--samples", "4", "--starts", "16", "--steps", "50",
    ]);
    assert_eq!(code, 0);
    assert!(r["results"][0]["certificate"]["value"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn reruns_are_byte_identical() {
    let args = ["scan", "--metric", "builtin:hopf(2)", "--functional", "hsc", "--region", "metric", "--starts", "8", "--steps", "20", "--seed", "7"];
    let a = curvlab(&args);
    let b = Command::new(env!("CARGO_BIN_EXE_curvlab")).args(args).env("CURVLAB_THREADS", "1").output().unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn exit_codes() {
    assert_eq!(curvlab(&["curvature", "--metric", "builtin:nope"]).status.code(), Some(2));
    assert_eq!(curvlab(&["curvature", "--metric", "file:/nonexistent.json"]).status.code(), Some(2));
    assert_eq!(curvlab(&["curvature", "--metric", "builtin:example22", "--points", "1,0"]).status.code(), Some(2));
    assert_eq!(curvlab(&["curvature", "--order", "3"]).status.code(), Some(2));
    let breach = curvlab(&["curvature", "--metric", "builtin:hopf(2)", "--points", "1,0", "--check", "pluriclosed", "--tol", "1e-30"]);
    assert_eq!(breach.status.code(), Some(1));
    let r: Value = serde_json::from_slice(&breach.stdout).unwrap();
    assert_eq!(r["passed"], false);
}

#[test]
fn csv_reports_carry_scheme() {
    let out = curvlab(&["curvature", "--metric", "builtin:example22", "--points", "0,0;0.1,0", "--format", "csv", "--h", "2e-3", "--order", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| &r[1] == "2e-3" && &r[2] == "2"));
}

#[test]
fn fixtures_write_loadable_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = curvlab(&["fixtures", "--write", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    for name in ["flat", "poincare_disk", "poincare_polydisk", "example22", "hopf"] {
        let path = dir.path().join(format!("{}.json", name));
        let spec = format!("file:{}", path.display());
        let code = curvlab(&["curvature", "--metric", &spec, "--region", "metric", "--samples", "2"]).status.code();
        assert_eq!(code, Some(0), "{}", name);
    }
    let shipped = std::fs::read_to_string(fixture("hopf.json").trim_start_matches("file:")).unwrap();
    assert_eq!(std::fs::read_to_string(dir.path().join("hopf.json")).unwrap(), shipped);
}

#[test]
fn flow_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(
        &path,
        r#"{"metric": "builtin:poincare_polydisk(1)", "tau": "inf", "dt": 0.001, "steps": 2,
            "grid": {"extent": [-0.3, 0.3], "resolution": 9, "boundary": "frozen"}, "kappa0": 2}"#,
    )
    .unwrap();
    let (r, code) = json(&["flow", "--config", path.to_str().unwrap(), "--format", "json"]);
    assert_eq!(code, 0);
    assert_eq!(r["results"]["steps"].as_array().unwrap().len(), 3);
    assert!(r["results"]["steps"][0]["center_residual"].is_f64());
    assert_eq!(r["config"]["run"]["grid"]["boundary"], "frozen");
}
