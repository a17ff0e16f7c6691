//! C ABI for `sinkflow`.
//!
//! Problems and solutions are opaque heap handles (`SkProblem`, `SkSolution`)
//! released with their `*_free` function. Every fallible call returns an
//! `SkStatus`; on failure `sk_last_error_message` describes the error for the
//! calling thread. Array outputs are copied into caller-owned buffers whose
//! lengths are passed explicitly; plans are row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sinkflow::kernels::{heat_kernel_eval, DomainSpec};
use sinkflow::problem::{random_instance, ProblemInstance};
use sinkflow::sinkhorn::{plan_from_potentials, solve, Solution, SolveConfig, SolveMode, SolveStatus};
use sinkflow::stability::{scan_stability, test_equation_eigenvalues};
use sinkflow::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    BufferTooSmall = 4,
    Numerical = 5,
    Panic = 6,
}

/// Termination state of a solve.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SkSolveStatus {
    Converged = 0,
    MaxIter = 1,
    Diverged = 2,
}

/// Iteration variable of the solver.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SkMode {
    Log = 0,
    Scaling = 1,
}

/// Opaque problem handle.
pub struct SkProblem {
    inner: ProblemInstance,
}

/// Opaque solution handle.
pub struct SkSolution {
    inner: Solution,
    plan: Vec<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl ToString) {
    let s = CString::new(msg.to_string().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = s);
}

fn status_of(err: &Error) -> SkStatus {
    match err {
        Error::Json(_) => SkStatus::Parse,
        Error::Diverged { .. } | Error::NotConverged { .. } | Error::NonFinite(_) => SkStatus::Numerical,
        _ => SkStatus::InvalidArgument,
    }
}

fn guard<F: FnOnce() -> Result<(), (SkStatus, String)>>(f: F) -> SkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SkStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SkStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (SkStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (SkStatus, String) {
    (SkStatus::NullPointer, format!("{what} is null"))
}

unsafe fn copy_out(src: &[f64], dst: *mut f64, len: usize, what: &str) -> Result<(), (SkStatus, String)> {
    if dst.is_null() {
        return Err(null(what));
    }
    if len < src.len() {
        return Err((
            SkStatus::BufferTooSmall,
            format!("{what}: need {} entries, got {len}", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

/// Message for the last failed call on this thread; empty if none. Valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sk_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a problem from the JSON config format (`domain`, `epsilon`,
/// `mu0`, `mu1`; extra solver settings are ignored).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sk_problem_from_json(json: *const c_char, out: *mut *mut SkProblem) -> SkStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| (SkStatus::Parse, format!("json is not UTF-8: {e}")))?;
        let cfg = sinkflow::io::RunConfig::from_json_str(text).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(SkProblem { inner: cfg.problem }));
        Ok(())
    })
}

/// Random problem with `n` atoms per marginal in the unit box of `dim`
/// dimensions; `torus_period > 0` selects the flat torus with that period.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sk_problem_random(
    seed: u64,
    n: usize,
    dim: usize,
    epsilon: f64,
    torus_period: f64,
    out: *mut *mut SkProblem,
) -> SkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let domain = if torus_period > 0.0 {
            DomainSpec::flat_torus(vec![torus_period; dim], sinkflow::kernels::DEFAULT_IMAGE_COUNT)
        } else {
            DomainSpec::euclidean(dim)
        }
        .map_err(lib_err)?;
        let p = random_instance(seed, n, &domain, epsilon).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(SkProblem { inner: p }));
        Ok(())
    })
}

/// Number of atoms of each marginal.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sk_problem_size(problem: *const SkProblem, n0: *mut usize, n1: *mut usize) -> SkStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        if n0.is_null() || n1.is_null() {
            return Err(null("size output"));
        }
        *n0 = p.inner.mu0.len();
        *n1 = p.inner.mu1.len();
        Ok(())
    })
}

/// # Safety
/// `problem` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sk_problem_free(problem: *mut SkProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Runs the solver. Divergence and iteration caps are reported through
/// `sk_solution_status`, not as errors.
///
/// # Safety
/// `problem` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sk_solve(
    problem: *const SkProblem,
    h: f64,
    tol: f64,
    max_iter: usize,
    mode: SkMode,
    out: *mut *mut SkSolution,
) -> SkStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = SolveConfig {
            h,
            tol,
            max_iter,
            mode: match mode {
                SkMode::Log => SolveMode::LogDomain,
                SkMode::Scaling => SolveMode::ScalingDomain,
            },
            record_trace: false,
        };
        let sol = solve(&p.inner, &cfg).map_err(lib_err)?;
        let k = p.inner.kernel().map_err(lib_err)?;
        let plan = plan_from_potentials(&sol.potentials, &k).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(SkSolution {
            inner: sol,
            plan: plan.iter().copied().collect(),
        }));
        Ok(())
    })
}

/// Termination state, iteration count and final residual; any output
/// pointer may be null.
///
/// # Safety
/// `solution` must be a live handle; non-null outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn sk_solution_status(
    solution: *const SkSolution,
    status: *mut SkSolveStatus,
    iterations: *mut usize,
    residual: *mut f64,
) -> SkStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        if let Some(out) = status.as_mut() {
            *out = match s.inner.status() {
                SolveStatus::Converged => SkSolveStatus::Converged,
                SolveStatus::MaxIter => SkSolveStatus::MaxIter,
                SolveStatus::Diverged => SkSolveStatus::Diverged,
            };
        }
        if let Some(out) = iterations.as_mut() {
            *out = s.inner.iterations();
        }
        if let Some(out) = residual.as_mut() {
            *out = s.inner.residual();
        }
        Ok(())
    })
}

/// Copies the gauge-fixed potentials `f` (length `n0`) and `g` (length `n1`).
///
/// # Safety
/// Buffers must hold at least the stated number of doubles.
#[no_mangle]
pub unsafe extern "C" fn sk_solution_potentials(
    solution: *const SkSolution,
    f: *mut f64,
    f_len: usize,
    g: *mut f64,
    g_len: usize,
) -> SkStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        copy_out(&s.inner.potentials.f.to_vec(), f, f_len, "f")?;
        copy_out(&s.inner.potentials.g.to_vec(), g, g_len, "g")
    })
}

/// Copies the scalings `a = exp f` and `b = exp g`.
///
/// # Safety
/// Buffers must hold at least the stated number of doubles.
#[no_mangle]
pub unsafe extern "C" fn sk_solution_scalings(
    solution: *const SkSolution,
    a: *mut f64,
    a_len: usize,
    b: *mut f64,
    b_len: usize,
) -> SkStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        copy_out(&s.inner.scalings.a.to_vec(), a, a_len, "a")?;
        copy_out(&s.inner.scalings.b.to_vec(), b, b_len, "b")
    })
}

/// Copies the `n0 × n1` plan, row-major.
///
/// # Safety
/// `out` must hold at least `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sk_solution_plan(solution: *const SkSolution, out: *mut f64, len: usize) -> SkStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        copy_out(&s.plan, out, len, "plan")
    })
}

/// # Safety
/// `solution` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sk_solution_free(solution: *mut SkSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Spectral radius of the splitting on the linear test equation.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sk_stability_radius(h: f64, delta: f64, out: *mut f64) -> SkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if !(0.0..=1.0).contains(&delta) || !h.is_finite() {
            return Err((SkStatus::InvalidArgument, format!("bad (h, delta) = ({h}, {delta})")));
        }
        *out = test_equation_eigenvalues(h, delta)[0].magnitude;
        Ok(())
    })
}

/// Scans `[h_min, h_max]`; writes the optimal step, its radius and the
/// instability onset (NaN if the range never reaches radius 1).
///
/// # Safety
/// Output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sk_stability_scan(
    delta: f64,
    h_min: f64,
    h_max: f64,
    steps: usize,
    h_optimal: *mut f64,
    radius_optimal: *mut f64,
    h_onset: *mut f64,
) -> SkStatus {
    guard(|| {
        if h_optimal.is_null() || radius_optimal.is_null() || h_onset.is_null() {
            return Err(null("output"));
        }
        let rep = scan_stability(delta, h_min, h_max, steps).map_err(lib_err)?;
        *h_optimal = rep.h_optimal;
        *radius_optimal = rep.radius_optimal;
        *h_onset = rep.h_unstable_onset.unwrap_or(f64::NAN);
        Ok(())
    })
}

/// Heat kernel `K_ε(x, y)` in `dim` dimensions; `periods` null for `ℝⁿ`,
/// otherwise `dim` torus periods summed over `image_count` images per side.
///
/// # Safety
/// `x`, `y` (and `periods` if non-null) must hold `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn sk_heat_kernel(
    x: *const f64,
    y: *const f64,
    dim: usize,
    epsilon: f64,
    periods: *const f64,
    image_count: usize,
    out: *mut f64,
) -> SkStatus {
    guard(|| {
        if x.is_null() || y.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        if dim == 0 {
            return Err((SkStatus::InvalidArgument, "dim must be positive".into()));
        }
        let domain = if periods.is_null() {
            DomainSpec::euclidean(dim)
        } else {
            DomainSpec::flat_torus(std::slice::from_raw_parts(periods, dim).to_vec(), image_count)
        }
        .map_err(lib_err)?;
        let xs = std::slice::from_raw_parts(x, dim);
        let ys = std::slice::from_raw_parts(y, dim);
        *out = heat_kernel_eval(&domain, epsilon, xs, ys).map_err(lib_err)?;
        Ok(())
    })
}
