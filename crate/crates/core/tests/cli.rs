use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use ovm::cli::{run, ExitStatus};
use ovm::counterexample::fibonacci_example;
use ovm::{FiniteOVM, NaimarkDilation};
use serde_json::Value;
use tempfile::TempDir;

fn write(dir: &TempDir, name: &str, contents: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, contents).unwrap();
    path
}

fn fibonacci_file(dir: &TempDir) -> PathBuf {
    write(dir, "fib.json", &fibonacci_example().f.to_json())
}

fn spectral_file(dir: &TempDir) -> PathBuf {
    let doc = r#"{"dim": 2, "atoms": [{"lambda": 1.0, "effect": {"re": [[1, 0], [0, 1]]}}]}"#;
    write(dir, "delta.json", doc)
}

fn ovm(args: &[&str]) -> (ExitStatus, Value) {
    let mut full = vec!["ovm", "--json"];
    full.extend_from_slice(args);
    let exec = run(full);
    let report: Value = serde_json::from_str(&exec.rendered).unwrap();
    (exec.report.exit_status, report)
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn check_fibonacci_fixture() {
    let dir = TempDir::new().unwrap();
    let (status, r) = ovm(&["check", path(&fibonacci_file(&dir))]);
    assert_eq!(status, ExitStatus::Pass);
    let res = &r["results"];
    assert_eq!(res["spectral"], false);
    let var = res["variance"]["re"][0][0].as_f64().unwrap();
    assert!((var - 1.0).abs() < 1e-10);
    let hankel = res["hankel"].as_array().unwrap();
    assert_eq!(hankel.len(), 4);
    assert!(hankel.iter().all(|h| h["psd"] == true));
    assert_eq!(res["moments"].as_array().unwrap().len(), 7);
    assert!(r["inputs"].as_object().unwrap().values().all(|d| d.as_str().unwrap().starts_with("sha256:")));
}

#[test]
fn check_spectral_fixture() {
    let dir = TempDir::new().unwrap();
    let (status, r) = ovm(&["check", path(&spectral_file(&dir)), "--moments", "3", "--hankel", "1"]);
    assert_eq!(status, ExitStatus::Pass);
    assert_eq!(r["results"]["spectral"], true);
    let var = &r["results"]["variance"]["re"];
    assert!(var.as_array().unwrap().iter().flat_map(|row| row.as_array().unwrap()).all(|x| x.as_f64().unwrap().abs() < 1e-15));
    assert_eq!(r["results"]["moments"].as_array().unwrap().len(), 4);
}

#[test]
fn check_reports_normalization_defect() {
    let dir = TempDir::new().unwrap();
    let doc = r#"{"dim": 2, "atoms": [{"lambda": 0.0, "effect": {"re": [[0.9, 0], [0, 0.9]]}}]}"#;
    let (status, r) = ovm(&["check", path(&write(&dir, "short.json", doc))]);
    assert_eq!(status, ExitStatus::InputError);
    let msg = r["results"]["error"].as_str().unwrap();
    assert!(msg.contains("normalization defect 0.1"), "{msg}");
}

#[test]
fn check_reports_parse_location() {
    let dir = TempDir::new().unwrap();
    let (status, r) = ovm(&["check", path(&write(&dir, "bad.json", "{\"dim\": 2,\n \"atoms\": [}"))]);
    assert_eq!(status, ExitStatus::InputError);
    assert!(r["results"]["error"].as_str().unwrap().contains("line 2"));

    let doc = r#"{"dim": 2, "atoms": [{"lambda": 0.0, "effect": {"re": [[1, 0]]}}]}"#;
    let (status, r) = ovm(&["check", path(&write(&dir, "shape.json", doc))]);
    assert_eq!(status, ExitStatus::InputError);
    assert!(r["results"]["error"].as_str().unwrap().contains("atoms[0].effect"));

    let (status, _) = ovm(&["check", "/nonexistent/file.json"]);
    assert_eq!(status, ExitStatus::InputError);
}

#[test]
fn counterexample_two_three() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("ce.json");
    let (status, r) = ovm(&["counterexample", "--p", "2", "--q", "3", "--out", path(&out)]);
    assert_eq!(status, ExitStatus::Pass);
    let alpha = r["results"]["params"]["alpha"].as_f64().unwrap();
    assert!((alpha - 5.0 / 32.0).abs() < 1e-12);
    let written: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(written["params"], r["results"]["params"]);
    let f = FiniteOVM::from_json_str(&written["povm"].to_string()).unwrap();
    assert!(!f.is_spectral(1e-9));
    assert_eq!(written["transcript"]["verdict"]["moments_match"], serde_json::json!([true, true]));
}

#[test]
fn counterexample_refuses_omega() {
    let (status, r) = ovm(&["counterexample", "--p", "1", "--q", "2"]);
    assert_eq!(status, ExitStatus::InputError);
    assert!(r["results"]["error"].as_str().unwrap().contains("spectral"));
}

#[test]
fn counterexample_scaled_equal_exponents() {
    let (status, r) = ovm(&["counterexample", "--p", "2", "--q", "2", "--tau", "2", "--dim", "2"]);
    assert_eq!(status, ExitStatus::Pass);
    let params: ovm::counterexample::CounterexampleParams =
        serde_json::from_value(r["results"]["params"].clone()).unwrap();
    assert!((params.moment(2) - 4.0).abs() < 1e-12);
    assert_eq!(r["results"]["povm"]["dim"], 2);

    let (status, _) = ovm(&["counterexample", "--p", "3", "--q", "5", "--tau", "-1"]);
    assert_eq!(status, ExitStatus::Pass);
}

#[test]
fn dilate_fibonacci_and_spectral() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("d.json");
    let (status, r) = ovm(&["dilate", path(&fibonacci_file(&dir)), "--out", path(&out)]);
    assert_eq!(status, ExitStatus::Pass);
    assert_eq!(r["results"]["big_dim"], 2);
    assert_eq!(r["results"]["commutes"], false);
    assert!(r["results"]["round_trip_residual"].as_f64().unwrap() <= 1e-9);
    let d = NaimarkDilation::from_json_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let back = d.compress().unwrap();
    let f = fibonacci_example().f;
    for (x, y) in back.atoms().iter().zip(f.atoms()) {
        assert!(x.effect.approx_eq(&y.effect, 1e-9).unwrap());
    }

    let (status, r) = ovm(&["dilate", path(&spectral_file(&dir)), "--out", path(&out)]);
    assert_eq!(status, ExitStatus::Pass);
    assert_eq!(r["results"]["commutes"], true);
    assert_eq!(r["results"]["big_dim"], 2);
}

#[test]
fn fibonacci_command() {
    let (status, r) = ovm(&["fibonacci", "--max-k", "20"]);
    assert_eq!(status, ExitStatus::Pass);
    let powers = r["results"]["powers"].as_array().unwrap();
    assert_eq!(powers.len(), 21);
    assert_eq!(powers[20]["expected"], 4181.0);
    assert_eq!(r["results"]["exact_at_2_and_3"], true);
    assert_eq!(ovm(&["fibonacci", "--max-k", "500"]).0, ExitStatus::InputError);
}

#[test]
fn verify_suites_pass_and_are_deterministic() {
    let args = ["ovm", "--json", "verify", "--suite", "theorem", "--trials", "60", "--seed", "5"];
    let a = run(args);
    let b = run(args);
    assert_eq!(a.report.exit_status, ExitStatus::Pass);
    assert_eq!(a.rendered, b.rendered);
    let text_a = run(&args[..1].iter().chain(&args[2..]).copied().collect::<Vec<_>>());
    let text_b = run(&args[..1].iter().chain(&args[2..]).copied().collect::<Vec<_>>());
    assert_eq!(text_a.rendered, text_b.rendered);
    assert!(text_a.rendered.ends_with("status: pass\n"));

    for suite in ["counterexample-grid", "hankel", "kadison"] {
        let (status, _) = ovm(&["verify", "--suite", suite, "--trials", "40"]);
        assert_eq!(status, ExitStatus::Pass, "{suite}");
    }
    assert_eq!(ovm(&["verify", "--suite", "bogus"]).0, ExitStatus::InputError);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_ovm");
    let code = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code().unwrap();
    assert_eq!(code(&["fibonacci"]), 0);
    assert_eq!(code(&["counterexample", "--p", "3", "--q", "4"]), 2);
    assert_eq!(code(&["no-such-command"]), 2);
    assert_eq!(code(&["--help"]), 0);

    let out = Command::new(bin).args(["--json", "counterexample", "--p", "2", "--q", "3"]).output().unwrap();
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["exit_status"], "pass");
    assert_eq!(r["command"], "counterexample");
}

#[test]
fn tolerance_flag_is_global() {
    let dir = TempDir::new().unwrap();
    let (status, _) = ovm(&["check", path(&fibonacci_file(&dir)), "--tol", "1e-6"]);
    assert_eq!(status, ExitStatus::Pass);
}
