use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use sinkflow_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(sk_last_error_message()) }.to_string_lossy().into_owned()
}

const JSON: &str = r#"{"domain": {"kind": "Euclidean", "dim": 1}, "epsilon": 0.05,
    "mu0": {"points": [[0.0], [0.5]], "weights": [0.5, 0.5]},
    "mu1": {"points": [[0.2], [0.9], [1.0]], "weights": [0.2, 0.3, 0.5]}}"#;

#[test]
fn solve_through_handles() {
    unsafe {
        let json = CString::new(JSON).unwrap();
        let mut p = ptr::null_mut();
        assert_eq!(sk_problem_from_json(json.as_ptr(), &mut p), SkStatus::Ok);
        let (mut n0, mut n1) = (0, 0);
        assert_eq!(sk_problem_size(p, &mut n0, &mut n1), SkStatus::Ok);
        assert_eq!((n0, n1), (2, 3));

        let mut s = ptr::null_mut();
        assert_eq!(sk_solve(p, 1.0, 1e-12, 10_000, SkMode::Scaling, &mut s), SkStatus::Ok);
        let mut status = SkSolveStatus::Diverged;
        let mut iters = 0;
        assert_eq!(sk_solution_status(s, &mut status, &mut iters, ptr::null_mut()), SkStatus::Ok);
        assert_eq!(status, SkSolveStatus::Converged);
        assert!(iters > 0);

        let mut plan = [0.0; 6];
        assert_eq!(sk_solution_plan(s, plan.as_mut_ptr(), 6), SkStatus::Ok);
        for j in 0..3 {
            let col = plan[j] + plan[3 + j];
            assert!((col - [0.2, 0.3, 0.5][j]).abs() < 1e-11);
        }
        let (mut f, mut g) = ([0.0; 2], [0.0; 3]);
        assert_eq!(sk_solution_potentials(s, f.as_mut_ptr(), 2, g.as_mut_ptr(), 3), SkStatus::Ok);
        assert!((f[0] + f[1]).abs() < 1e-12);
        let (mut a, mut b) = ([0.0; 2], [0.0; 3]);
        assert_eq!(sk_solution_scalings(s, a.as_mut_ptr(), 2, b.as_mut_ptr(), 3), SkStatus::Ok);
        assert!((a[1] - f[1].exp()).abs() < 1e-14 * a[1]);
        assert_eq!(
            sk_solution_potentials(s, f.as_mut_ptr(), 1, g.as_mut_ptr(), 3),
            SkStatus::BufferTooSmall
        );
        assert!(last_error().contains("need 2"));

        sk_solution_free(s);
        sk_problem_free(p);
    }
}

#[test]
fn divergence_is_a_status_not_an_error() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(sk_problem_random(1, 20, 2, 0.05, 0.0, &mut p), SkStatus::Ok);
        let mut s = ptr::null_mut();
        assert_eq!(sk_solve(p, 2.2, 1e-9, 10_000, SkMode::Log, &mut s), SkStatus::Ok);
        let mut status = SkSolveStatus::Converged;
        sk_solution_status(s, &mut status, ptr::null_mut(), ptr::null_mut());
        assert_eq!(status, SkSolveStatus::Diverged);
        sk_solution_free(s);
        sk_problem_free(p);
    }
}

#[test]
fn error_codes() {
    unsafe {
        let mut p = ptr::null_mut();
        let bad = CString::new("{not json").unwrap();
        assert_eq!(sk_problem_from_json(bad.as_ptr(), &mut p), SkStatus::Parse);
        assert!(p.is_null());
        assert_eq!(sk_problem_from_json(ptr::null(), &mut p), SkStatus::NullPointer);
        assert_eq!(sk_problem_random(0, 5, 2, -1.0, 0.0, &mut p), SkStatus::InvalidArgument);
        assert!(last_error().contains("epsilon"));
        let mut s = ptr::null_mut();
        assert_eq!(sk_solve(ptr::null(), 1.0, 1e-9, 10, SkMode::Log, &mut s), SkStatus::NullPointer);
        assert_eq!(sk_problem_random(0, 5, 2, 0.1, 0.0, &mut p), SkStatus::Ok);
        assert_eq!(sk_solve(p, -1.0, 1e-9, 10, SkMode::Log, &mut s), SkStatus::InvalidArgument);
        sk_problem_free(p);
        sk_problem_free(ptr::null_mut());
        sk_solution_free(ptr::null_mut());
    }
}

#[test]
fn stability_and_kernel_entry_points() {
    unsafe {
        let (mut h, mut r, mut onset) = (0.0, 0.0, 0.0);
        assert_eq!(sk_stability_scan(0.01, 0.0, 2.5, 500, &mut h, &mut r, &mut onset), SkStatus::Ok);
        assert!((h - 1.75).abs() < 0.05);
        assert!((onset - 2.0).abs() < 1e-3);
        assert_eq!(sk_stability_scan(0.01, 0.1, 1.9, 100, &mut h, &mut r, &mut onset), SkStatus::Ok);
        assert!(onset.is_nan());
        assert_eq!(sk_stability_scan(0.01, 2.0, 1.0, 10, &mut h, &mut r, &mut onset), SkStatus::InvalidArgument);

        let mut k = 0.0;
        let (x, y) = ([0.0, 0.0], [0.0, 0.0]);
        let eps = 1.0 / (4.0 * std::f64::consts::PI);
        assert_eq!(sk_heat_kernel(x.as_ptr(), y.as_ptr(), 2, eps, ptr::null(), 0, &mut k), SkStatus::Ok);
        assert!((k - 1.0).abs() < 1e-15);
        let periods = [1.0, 1.0];
        let mut kt = 0.0;
        assert_eq!(sk_heat_kernel(x.as_ptr(), y.as_ptr(), 2, eps, periods.as_ptr(), 5, &mut kt), SkStatus::Ok);
        assert!(kt > k);
    }
}

#[test]
fn c_program_links_against_header_and_staticlib() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<test binary> -> target/<profile>
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libsinkflow_ffi.a");
    assert!(lib.exists(), "missing {}", lib.display());
    let exe = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("sinkflow_smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(cc)
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("run C compiler");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "smoke exited with {:?}: {}", out.status, String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
