//! The `bsdp` binary: exit codes, output files and format handling.

mod common;

use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bsdp")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn sdpa(name: &str) -> String {
    common::data_dir().join("sdpa").join(name).display().to_string()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn generated_theta_converges() {
    let out = run(&["--gen", "theta:cycle,5", "--printlevel", "0"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let line = stdout(&out).lines().find(|l| l.starts_with("obj = ")).unwrap().to_string();
    let obj: f64 = line.trim_start_matches("obj = ").trim().parse().unwrap();
    assert!((obj - 5f64.sqrt()).abs() < 1e-5, "{obj}");
}

#[test]
fn sdpa_input_writes_a_result_record() {
    let dir = tempfile::tempdir().unwrap();
    let res = dir.path().join("res.json");
    let out = run(&["--input", &sdpa("basic.dat-s"), "--printlevel", "0", "--output", res.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = read_json(&res);
    for key in ["pobj", "dobj", "objective", "info", "state", "runhist"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["info"]["termination"], "converged");
    assert!(v["info"]["eta"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn written_problem_solves_identically() {
    let dir = tempfile::tempdir().unwrap();
    let prob = dir.path().join("prob.json");
    let (r1, r2) = (dir.path().join("a.json"), dir.path().join("b.json"));
    let a = run(&["--gen", "thetaplus:random,8,0.4,3", "--printlevel", "0", "--write-problem", prob.to_str().unwrap(), "--output", r1.to_str().unwrap()]);
    assert_eq!(code(&a), 0);
    let b = run(&["--input", prob.to_str().unwrap(), "--printlevel", "0", "--output", r2.to_str().unwrap()]);
    assert_eq!(code(&b), 0);
    let (va, vb) = (read_json(&r1), read_json(&r2));
    assert_eq!(va["pobj"], vb["pobj"]);
    assert_eq!(va["state"], vb["state"]);
}

#[test]
fn iteration_limit_exits_with_two_and_still_writes() {
    let dir = tempfile::tempdir().unwrap();
    let res = dir.path().join("res.json");
    let out = run(&["--gen", "ncm:8,1", "--maxiter", "3", "--printlevel", "0", "--output", res.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert_eq!(read_json(&res)["info"]["termination"], "max_iter");
}

#[test]
fn input_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.dat-s");
    std::fs::write(&bad, "2\n1\n2\n1 2\n0 1 1 1 oops\n").unwrap();
    let cases: Vec<Vec<String>> = vec![
        vec!["--input".into(), dir.path().join("missing.dat-s").display().to_string()],
        vec!["--input".into(), bad.display().to_string()],
        vec!["--gen".into(), "nosuch:1".into()],
        vec!["--gen".into(), "theta:cycle,5".into(), "--tol".into(), "-1".into()],
        vec!["--gen".into(), "theta:cycle,5".into(), "--bogus".into()],
        vec![],
    ];
    for args in cases {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = run(&refs);
        assert_eq!(code(&out), 1, "{args:?}");
        assert!(!out.stderr.is_empty(), "{args:?}");
    }
}

#[test]
fn help_exits_with_zero() {
    let out = run(&["--help"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("--gen"));
}

#[test]
fn sdpa_sign_flag_selects_the_objective_sense() {
    // X11 + X12 = 1, X22 = 2, X psd: trace(X) ranges over [4 - sqrt3, 4 + sqrt3].
    let r3 = 3f64.sqrt();
    let obj = |sign: &str| -> f64 {
        let o = run(&["--input", &sdpa("basic.dat-s"), "--printlevel", "0", "--tol", "1e-8", "--sdpa-sign", sign]);
        assert_eq!(code(&o), 0, "{sign}");
        stdout(&o).lines().find(|l| l.starts_with("obj = ")).unwrap().trim_start_matches("obj = ").trim().parse().unwrap()
    };
    assert!((obj("min") + 4.0 + r3).abs() < 1e-6);
    assert!((obj("max") - (4.0 - r3)).abs() < 1e-6);
}
