//! The C ABI driven from Rust: handle lifecycle, status codes and data access.

use std::ffi::{CStr, CString};
use std::ptr;

use bsdp_ffi::*;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = bsdp_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn quiet() -> BsdpParams {
    let mut p = unsafe { std::mem::zeroed() };
    assert_eq!(unsafe { bsdp_params_default(&mut p) }, BsdpStatus::Ok);
    p.printlevel = 0;
    p
}

fn generate(spec: &str) -> *mut BsdpProblem {
    let mut prob = ptr::null_mut();
    assert_eq!(unsafe { bsdp_problem_generate(cstr(spec).as_ptr(), &mut prob) }, BsdpStatus::Ok);
    assert!(!prob.is_null());
    prob
}

fn sdpa_path() -> CString {
    cstr(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/data/sdpa/basic.dat-s"))
}

#[test]
fn theta_of_a_five_cycle() {
    unsafe {
        let prob = generate("theta:cycle,5");
        let (mut m, mut p, mut nb, mut dim) = (0, 0, 0, 0);
        assert_eq!(bsdp_problem_dims(prob, &mut m, &mut p, &mut nb, &mut dim), BsdpStatus::Ok);
        assert_eq!((m, p, nb, dim), (6, 0, 1, 15));

        let params = quiet();
        let mut res = ptr::null_mut();
        assert_eq!(bsdp_solve(prob, &params, &mut res), BsdpStatus::Ok);
        bsdp_problem_free(prob);

        let mut term = BsdpTermination::MaxTime;
        let (mut it1, mut it2) = (0, 0);
        assert_eq!(bsdp_result_termination(res, &mut term, &mut it1, &mut it2), BsdpStatus::Ok);
        assert_eq!(term, BsdpTermination::Converged);
        assert!(it1 + it2 > 0);

        let mut eta = f64::NAN;
        assert_eq!(bsdp_result_eta(res, &mut eta), BsdpStatus::Ok);
        assert!(eta <= params.tol);

        let mut obj = 0.0;
        assert_eq!(bsdp_result_source_objective(res, &mut obj), BsdpStatus::Ok);
        assert!((obj - 5f64.sqrt()).abs() < 1e-5, "{obj}");

        let mut n = 0;
        assert_eq!(bsdp_result_block_size(res, 0, &mut n), BsdpStatus::Ok);
        assert_eq!(n, 5);
        let mut x = vec![0.0; n * n];
        assert_eq!(bsdp_result_x_block(res, 0, x.as_mut_ptr(), x.len()), BsdpStatus::Ok);
        let trace: f64 = (0..n).map(|i| x[i * n + i]).sum();
        assert!((trace - 1.0).abs() < 1e-5);
        for i in 0..n {
            for j in 0..n {
                assert_eq!(x[i * n + j], x[j * n + i]);
            }
        }

        let mut y = vec![0.0; m];
        assert_eq!(bsdp_result_y(res, y.as_mut_ptr(), y.len()), BsdpStatus::Ok);
        assert!(y.iter().all(|v| v.is_finite()));
        bsdp_result_free(res);
    }
}

#[test]
fn sdpa_file_and_json_round_trip() {
    unsafe {
        let mut prob = ptr::null_mut();
        assert_eq!(bsdp_problem_read_sdpa(sdpa_path().as_ptr(), 0, &mut prob), BsdpStatus::Ok);
        let dir = tempfile::tempdir().unwrap();
        let pj = cstr(dir.path().join("p.json").to_str().unwrap());
        assert_eq!(bsdp_problem_write_json(prob, pj.as_ptr()), BsdpStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(bsdp_problem_read_json(pj.as_ptr(), &mut back), BsdpStatus::Ok);

        let params = quiet();
        let (mut r1, mut r2) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(bsdp_solve(prob, &params, &mut r1), BsdpStatus::Ok);
        assert_eq!(bsdp_solve(back, &params, &mut r2), BsdpStatus::Ok);
        let (mut p1, mut d1, mut p2, mut d2) = (0.0, 0.0, 0.0, 0.0);
        assert_eq!(bsdp_result_objectives(r1, &mut p1, &mut d1), BsdpStatus::Ok);
        assert_eq!(bsdp_result_objectives(r2, &mut p2, &mut d2), BsdpStatus::Ok);
        assert_eq!((p1, d1), (p2, d2));
        // X11 + X12 = 1, X22 = 2, X psd: the maximal trace is 4 + sqrt3.
        assert!((p1 + 4.0 + 3f64.sqrt()).abs() < 1e-5, "{p1}");

        let mut obj = 0.0;
        assert_eq!(bsdp_result_source_objective(r1, &mut obj), BsdpStatus::InvalidArgument);

        let rj = dir.path().join("r.json");
        assert_eq!(bsdp_result_write_json(r1, cstr(rj.to_str().unwrap()).as_ptr()), BsdpStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&rj).unwrap()).unwrap();
        assert_eq!(v["info"]["termination"], "converged");
        assert_eq!(v["pobj"].as_f64().unwrap(), p1);

        for h in [r1, r2] {
            bsdp_result_free(h);
        }
        bsdp_problem_free(prob);
        bsdp_problem_free(back);
    }
}

#[test]
fn iteration_limit_is_reported_not_an_error() {
    unsafe {
        let prob = generate("ncm:8,1");
        let mut params = quiet();
        params.maxiter = 3;
        let mut res = ptr::null_mut();
        assert_eq!(bsdp_solve(prob, &params, &mut res), BsdpStatus::Ok);
        let mut term = BsdpTermination::Converged;
        assert_eq!(bsdp_result_termination(res, &mut term, ptr::null_mut(), ptr::null_mut()), BsdpStatus::Ok);
        assert_eq!(term, BsdpTermination::MaxIter);
        bsdp_result_free(res);
        bsdp_problem_free(prob);
    }
}

#[test]
fn null_solve_params_use_defaults() {
    unsafe {
        let prob = generate("theta:cycle,5");
        let mut res = ptr::null_mut();
        assert_eq!(bsdp_solve(prob, ptr::null(), &mut res), BsdpStatus::Ok);
        let mut eta = 1.0;
        assert_eq!(bsdp_result_eta(res, &mut eta), BsdpStatus::Ok);
        assert!(eta <= 1e-6);
        bsdp_result_free(res);
        bsdp_problem_free(prob);
    }
}

#[test]
fn failures_set_status_and_message() {
    unsafe {
        let mut prob = ptr::null_mut();
        assert_eq!(bsdp_problem_generate(ptr::null(), &mut prob), BsdpStatus::NullArgument);
        assert!(last_error().contains("spec"));
        assert_eq!(bsdp_problem_generate(cstr("theta:cycle,5").as_ptr(), ptr::null_mut()), BsdpStatus::NullArgument);

        assert_eq!(bsdp_problem_generate(cstr("nosuch:1").as_ptr(), &mut prob), BsdpStatus::InvalidArgument);
        assert!(prob.is_null());
        assert!(!last_error().is_empty());

        let missing = cstr("/nonexistent/dir/p.dat-s");
        assert_eq!(bsdp_problem_read_sdpa(missing.as_ptr(), 0, &mut prob), BsdpStatus::Io);
        assert!(prob.is_null());
        assert!(last_error().contains("/nonexistent/dir/p.dat-s"));
        assert_eq!(bsdp_problem_read_json(missing.as_ptr(), &mut prob), BsdpStatus::Io);

        let bad = [0xffu8, 0];
        assert_eq!(bsdp_problem_read_sdpa(bad.as_ptr().cast(), 0, &mut prob), BsdpStatus::InvalidArgument);

        let prob = generate("theta:cycle,5");
        let mut params = quiet();
        params.tol = -1.0;
        let mut res = ptr::null_mut();
        assert_eq!(bsdp_solve(prob, &params, &mut res), BsdpStatus::InvalidArgument);
        assert!(res.is_null());
        assert!(last_error().contains("tol"));
        assert_eq!(bsdp_solve(ptr::null(), &quiet(), &mut res), BsdpStatus::NullArgument);

        assert_eq!(bsdp_solve(prob, &quiet(), &mut res), BsdpStatus::Ok);
        let mut small = [0.0; 3];
        assert_eq!(bsdp_result_x_block(res, 0, small.as_mut_ptr(), small.len()), BsdpStatus::BufferTooSmall);
        assert_eq!(small, [0.0; 3]);
        assert_eq!(bsdp_result_x_block(res, 1, small.as_mut_ptr(), small.len()), BsdpStatus::InvalidArgument);
        assert_eq!(bsdp_result_y(res, ptr::null_mut(), 10), BsdpStatus::NullArgument);
        let mut n = 0;
        assert_eq!(bsdp_result_block_size(res, 7, &mut n), BsdpStatus::InvalidArgument);
        assert_eq!(bsdp_result_eta(ptr::null(), &mut 0.0), BsdpStatus::NullArgument);

        bsdp_result_free(res);
        bsdp_problem_free(prob);
        bsdp_result_free(ptr::null_mut());
        bsdp_problem_free(ptr::null_mut());
    }
}

#[test]
fn version_matches_the_package() {
    let v = unsafe { CStr::from_ptr(bsdp_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/bsdp.h")).unwrap();
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 15);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    for ty in ["typedef struct BsdpProblem BsdpProblem;", "typedef struct BsdpResult BsdpResult;", "BSDP_STATUS_BUFFER_TOO_SMALL"] {
        assert!(header.contains(ty), "{ty}");
    }
}
