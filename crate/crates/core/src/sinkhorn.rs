//! Sinkhorn iteration as a time discretization of the flow
//!
//! ```text
//! ∂ₛf = −f − log(K exp g) + log mass0
//! ∂ₛg = −g − log(Kᵀ exp f) + log mass1
//! ```
//!
//! The Trotter splitting of this flow combined with forward Euler gives the
//! family of updates
//!
//! ```text
//! f⁺ = (1−h)·f − h·log(K exp g)  + h·log mass0
//! g⁺ = (1−h)·g − h·log(Kᵀ exp f⁺) + h·log mass1
//! ```
//!
//! which is the classical alternating Sinkhorn update at `h = 1` and the
//! over-relaxed variant for `h ∈ (1, 2)`. Steps with `h ≥ 2` are linearly
//! unstable.
//!
//! The state `(f, g)` is defined up to the gauge `(f + σ, g − σ)`. Every
//! right-hand side, residual and plan in this module is gauge-invariant;
//! representatives are only fixed (`mean(f) = 0`) on output.

use log::warn;
use ndarray::{Array1, Array2, ArrayView1, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelOperator;
use crate::problem::ProblemInstance;

/// Residual growth factor (relative to the starting residual) treated as
/// divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// Log-scalings `(f, g) = (log a, log b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Potentials {
    pub f: Array1<f64>,
    pub g: Array1<f64>,
}

/// Scalings `(a, b)`; the plan is `aᵢ Kᵢⱼ bⱼ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Scalings {
    pub a: Array1<f64>,
    pub b: Array1<f64>,
}

impl Potentials {
    pub fn zeros(n0: usize, n1: usize) -> Self {
        Self {
            f: Array1::zeros(n0),
            g: Array1::zeros(n1),
        }
    }

    pub fn to_scalings(&self) -> Scalings {
        Scalings {
            a: self.f.mapv(f64::exp),
            b: self.g.mapv(f64::exp),
        }
    }

    /// `(f + σ, g − σ)`, another representative of the same state.
    pub fn gauge_shifted(&self, sigma: f64) -> Self {
        Self {
            f: &self.f + sigma,
            g: &self.g - sigma,
        }
    }

    /// Representative with `mean(f) = 0`.
    pub fn gauge_fixed(&self) -> Self {
        let mean = self.f.mean().unwrap_or(0.0);
        self.gauge_shifted(-mean)
    }

    pub fn is_finite(&self) -> bool {
        self.f.iter().chain(self.g.iter()).all(|v| v.is_finite())
    }
}

impl Scalings {
    pub fn to_potentials(&self) -> Potentials {
        Potentials {
            f: self.a.mapv(f64::ln),
            g: self.b.mapv(f64::ln),
        }
    }

    /// `(c·a, b/c)`.
    pub fn gauge_scaled(&self, c: f64) -> Self {
        Self {
            a: &self.a * c,
            b: &self.b / c,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveMode {
    /// Iterate the potentials with log-sum-exp kernel products.
    #[serde(rename = "log")]
    LogDomain,
    /// Iterate the scalings with plain kernel products. Underflows for small ε.
    #[serde(rename = "scaling")]
    ScalingDomain,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveConfig {
    pub h: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub mode: SolveMode,
    pub record_trace: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            h: 1.0,
            tol: 1e-9,
            max_iter: 10_000,
            mode: SolveMode::LogDomain,
            record_trace: false,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::NonPositiveStep(self.h));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    MaxIter,
    Diverged,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "Converged",
            SolveStatus::MaxIter => "MaxIter",
            SolveStatus::Diverged => "Diverged",
        }
    }
}

/// One row of a solve trace. Iteration 0 is the starting state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub residual_l2: f64,
    pub coupling_mass: f64,
    pub f1: f64,
    pub f2: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveTrace {
    pub records: Vec<TraceRecord>,
    pub status: SolveStatus,
    pub iterations: usize,
    pub final_residual: f64,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub potentials: Potentials,
    pub scalings: Scalings,
    pub trace: SolveTrace,
}

impl Solution {
    pub fn status(&self) -> SolveStatus {
        self.trace.status
    }

    pub fn iterations(&self) -> usize {
        self.trace.iterations
    }

    pub fn residual(&self) -> f64 {
        self.trace.final_residual
    }
}

fn check_shapes(k: &KernelOperator, n0: usize, n1: usize, what: &str) -> Result<()> {
    if k.shape() != (n0, n1) {
        return Err(Error::ShapeMismatch(format!(
            "{what} of lengths ({n0}, {n1}) against kernel of shape {:?}",
            k.shape()
        )));
    }
    Ok(())
}

fn check_masses(k: &KernelOperator, mass0: &Array1<f64>, mass1: &Array1<f64>) -> Result<()> {
    check_shapes(k, mass0.len(), mass1.len(), "masses")?;
    if mass0.iter().chain(mass1.iter()).any(|&m| !(m > 0.0 && m.is_finite())) {
        return Err(Error::NonPositiveWeight);
    }
    Ok(())
}

/// Marginals of the current plan, in log form, plus the derived diagnostics.
#[derive(Clone, Debug)]
pub(crate) struct MarginalState {
    pub log_row: Array1<f64>,
    pub log_col: Array1<f64>,
}

impl MarginalState {
    pub(crate) fn from_potentials(p: &Potentials, k: &KernelOperator) -> Self {
        let log_row = &p.f + &k.log_apply_unchecked(p.g.view(), false);
        let log_col = &p.g + &k.log_apply_unchecked(p.f.view(), true);
        Self { log_row, log_col }
    }

    pub(crate) fn from_scalings(s: &Scalings, k: &KernelOperator) -> Self {
        let row = &s.a * &k.apply_unchecked(s.b.view(), false);
        let col = &s.b * &k.apply_unchecked(s.a.view(), true);
        Self {
            log_row: row.mapv(f64::ln),
            log_col: col.mapv(f64::ln),
        }
    }

    /// `(df, dg) = (log mass0 − log row, log mass1 − log col)`.
    pub(crate) fn rhs(&self, mass0: &Array1<f64>, mass1: &Array1<f64>) -> (Array1<f64>, Array1<f64>) {
        let df = Zip::from(mass0).and(&self.log_row).map_collect(|m, l| m.ln() - l);
        let dg = Zip::from(mass1).and(&self.log_col).map_collect(|m, l| m.ln() - l);
        (df, dg)
    }

    pub(crate) fn record(&self, iter: usize, mass0: &Array1<f64>, mass1: &Array1<f64>) -> TraceRecord {
        let (df, dg) = self.rhs(mass0, mass1);
        let residual_l2 = l2_pair(&df, &dg);
        let row = self.log_row.mapv(f64::exp);
        let col = self.log_col.mapv(f64::exp);
        TraceRecord {
            iter,
            residual_l2,
            coupling_mass: row.sum(),
            f1: i_divergence_from_log_ratio(&row, &df, mass0),
            f2: i_divergence_from_log_ratio(&col, &dg, mass1),
        }
    }
}

/// `Σ σ log(σ/m) − σ + m` given `σ` and `log(m/σ)`.
fn i_divergence_from_log_ratio(sigma: &Array1<f64>, neg_log_ratio: &Array1<f64>, m: &Array1<f64>) -> f64 {
    Zip::from(sigma)
        .and(neg_log_ratio)
        .and(m)
        .fold(0.0, |acc, &s, &nl, &mm| acc - s * nl - s + mm)
}

fn l2_pair(df: &Array1<f64>, dg: &Array1<f64>) -> f64 {
    (df.dot(df) + dg.dot(dg)).sqrt()
}

/// Right-hand side of the flow in log coordinates.
pub fn ode_rhs_log(
    p: &Potentials,
    k: &KernelOperator,
    mass0: &Array1<f64>,
    mass1: &Array1<f64>,
) -> Result<(Array1<f64>, Array1<f64>)> {
    check_shapes(k, p.f.len(), p.g.len(), "potentials")?;
    check_masses(k, mass0, mass1)?;
    Ok(MarginalState::from_potentials(p, k).rhs(mass0, mass1))
}

/// Right-hand side of the flow in scaling coordinates:
/// `da = −a∘log(a∘(Kb)/mass0)`, `db = −b∘log(b∘(Kᵀa)/mass1)`.
pub fn ode_rhs_scaling(
    s: &Scalings,
    k: &KernelOperator,
    mass0: &Array1<f64>,
    mass1: &Array1<f64>,
) -> Result<(Array1<f64>, Array1<f64>)> {
    check_shapes(k, s.a.len(), s.b.len(), "scalings")?;
    check_masses(k, mass0, mass1)?;
    if s.a.iter().chain(s.b.iter()).any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument("scalings must be positive".into()));
    }
    let kb = k.apply_unchecked(s.b.view(), false);
    let kta = k.apply_unchecked(s.a.view(), true);
    let da = Zip::from(&s.a)
        .and(&kb)
        .and(mass0)
        .map_collect(|&a, &kb, &m| -a * (a * kb / m).ln());
    let db = Zip::from(&s.b)
        .and(&kta)
        .and(mass1)
        .map_collect(|&b, &ka, &m| -b * (b * ka / m).ln());
    Ok((da, db))
}

fn relax(old: ArrayView1<f64>, lse: &Array1<f64>, mass: &Array1<f64>, h: f64) -> Array1<f64> {
    Zip::from(old)
        .and(lse)
        .and(mass)
        .map_collect(|&o, &l, &m| (1.0 - h) * o - h * l + h * m.ln())
}

/// One sequential Trotter–Euler step of size `h` (f first, then g from f⁺).
pub fn splitting_step(
    p: &Potentials,
    k: &KernelOperator,
    mass0: &Array1<f64>,
    mass1: &Array1<f64>,
    h: f64,
) -> Result<Potentials> {
    if !(h > 0.0) {
        return Err(Error::NonPositiveStep(h));
    }
    check_shapes(k, p.f.len(), p.g.len(), "potentials")?;
    check_masses(k, mass0, mass1)?;
    Ok(splitting_step_unchecked(p, k, mass0, mass1, h))
}

fn splitting_step_unchecked(
    p: &Potentials,
    k: &KernelOperator,
    mass0: &Array1<f64>,
    mass1: &Array1<f64>,
    h: f64,
) -> Potentials {
    let f = relax(p.f.view(), &k.log_apply_unchecked(p.g.view(), false), mass0, h);
    let g = relax(p.g.view(), &k.log_apply_unchecked(f.view(), true), mass1, h);
    Potentials { f, g }
}

/// The same step on scalings: `a⁺ = a^{1−h}·(mass0/(Kb))^h`, then
/// `b⁺ = b^{1−h}·(mass1/(Kᵀa⁺))^h`.
pub fn scaling_step(
    s: &Scalings,
    k: &KernelOperator,
    mass0: &Array1<f64>,
    mass1: &Array1<f64>,
    h: f64,
) -> Result<Scalings> {
    if !(h > 0.0) {
        return Err(Error::NonPositiveStep(h));
    }
    check_shapes(k, s.a.len(), s.b.len(), "scalings")?;
    check_masses(k, mass0, mass1)?;
    Ok(scaling_step_unchecked(s, k, mass0, mass1, h))
}

fn scaling_step_unchecked(
    s: &Scalings,
    k: &KernelOperator,
    mass0: &Array1<f64>,
    mass1: &Array1<f64>,
    h: f64,
) -> Scalings {
    let over = |old: f64, target: f64| {
        if h == 1.0 {
            target
        } else {
            old.powf(1.0 - h) * target.powf(h)
        }
    };
    let kb = k.apply_unchecked(s.b.view(), false);
    let a = Zip::from(&s.a)
        .and(&kb)
        .and(mass0)
        .map_collect(|&a, &kb, &m| over(a, m / kb));
    let kta = k.apply_unchecked(a.view(), true);
    let b = Zip::from(&s.b)
        .and(&kta)
        .and(mass1)
        .map_collect(|&b, &ka, &m| over(b, m / ka));
    Scalings { a, b }
}

/// L² norm of the log-coordinate right-hand side.
pub fn residual(p: &Potentials, k: &KernelOperator, mass0: &Array1<f64>, mass1: &Array1<f64>) -> Result<f64> {
    let (df, dg) = ode_rhs_log(p, k, mass0, mass1)?;
    Ok(l2_pair(&df, &dg))
}

/// [`residual`] evaluated from scalings with plain kernel products.
pub fn residual_scalings(s: &Scalings, k: &KernelOperator, mass0: &Array1<f64>, mass1: &Array1<f64>) -> Result<f64> {
    check_shapes(k, s.a.len(), s.b.len(), "scalings")?;
    check_masses(k, mass0, mass1)?;
    let (df, dg) = MarginalState::from_scalings(s, k).rhs(mass0, mass1);
    Ok(l2_pair(&df, &dg))
}

/// `P[i][j] = aᵢ·K[i][j]·bⱼ`.
pub fn entropic_plan(s: &Scalings, k: &KernelOperator) -> Result<Array2<f64>> {
    check_shapes(k, s.a.len(), s.b.len(), "scalings")?;
    let mut plan = k.entries().clone();
    Zip::indexed(&mut plan).for_each(|(i, j), v| *v = s.a[i] * *v * s.b[j]);
    Ok(plan)
}

/// `P[i][j] = exp(fᵢ + log K[i][j] + gⱼ)`; safe where the scalings overflow.
pub fn plan_from_potentials(p: &Potentials, k: &KernelOperator) -> Result<Array2<f64>> {
    check_shapes(k, p.f.len(), p.g.len(), "potentials")?;
    let mut plan = k.log_entries().clone();
    Zip::indexed(&mut plan).for_each(|(i, j), v| *v = (p.f[i] + *v + p.g[j]).exp());
    Ok(plan)
}

/// Runs the splitting iteration from `f = g = 0` on a validated problem.
pub fn solve(problem: &ProblemInstance, config: &SolveConfig) -> Result<Solution> {
    let k = problem.kernel()?;
    solve_with_kernel(&k, problem.mass0(), problem.mass1(), None, config)
}

/// Runs the splitting iteration on an explicit kernel from an optional start.
///
/// The loop stops when the residual drops to `tol` (`Converged`), after
/// `max_iter` steps (`MaxIter`), or when the residual turns non-finite or
/// exceeds [`DIVERGENCE_FACTOR`] times its starting value (`Diverged`; the
/// last finite state is returned).
pub fn solve_with_kernel(
    k: &KernelOperator,
    mass0: &Array1<f64>,
    mass1: &Array1<f64>,
    init: Option<&Potentials>,
    config: &SolveConfig,
) -> Result<Solution> {
    config.validate()?;
    check_masses(k, mass0, mass1)?;
    let (n0, n1) = k.shape();
    let mut pot = match init {
        Some(p) => {
            check_shapes(k, p.f.len(), p.g.len(), "initial potentials")?;
            if !p.is_finite() {
                return Err(Error::NonFinite("initial potentials".into()));
            }
            p.clone()
        }
        None => Potentials::zeros(n0, n1),
    };
    if config.h >= 2.0 {
        warn!("step size h = {} is outside the linear stability interval (0, 2)", config.h);
    }

    let mut records = Vec::new();
    let start = match config.mode {
        SolveMode::LogDomain => MarginalState::from_potentials(&pot, k),
        SolveMode::ScalingDomain => MarginalState::from_scalings(&pot.to_scalings(), k),
    }
    .record(0, mass0, mass1);
    if config.record_trace {
        records.push(start);
    }
    let limit = DIVERGENCE_FACTOR * start.residual_l2.max(config.tol);

    let mut scal = pot.to_scalings();
    let mut status = SolveStatus::MaxIter;
    let mut final_residual = start.residual_l2;
    let mut iterations = 0;
    for iter in 1..=config.max_iter {
        let (next_pot, next_scal, state) = match config.mode {
            SolveMode::LogDomain => {
                let p = splitting_step_unchecked(&pot, k, mass0, mass1, config.h);
                let st = MarginalState::from_potentials(&p, k);
                (Some(p), None, st)
            }
            SolveMode::ScalingDomain => {
                let s = scaling_step_unchecked(&scal, k, mass0, mass1, config.h);
                let st = MarginalState::from_scalings(&s, k);
                (None, Some(s), st)
            }
        };
        let rec = state.record(iter, mass0, mass1);
        iterations = iter;
        if !rec.residual_l2.is_finite() || rec.residual_l2 > limit {
            status = SolveStatus::Diverged;
            if rec.residual_l2.is_finite() {
                final_residual = rec.residual_l2;
                if config.record_trace {
                    records.push(rec);
                }
            } else {
                final_residual = f64::INFINITY;
            }
            break;
        }
        if let Some(p) = next_pot {
            pot = p;
        }
        if let Some(s) = next_scal {
            scal = s;
        }
        final_residual = rec.residual_l2;
        if config.record_trace {
            records.push(rec);
        }
        if rec.residual_l2 <= config.tol {
            status = SolveStatus::Converged;
            break;
        }
    }

    let potentials = match config.mode {
        SolveMode::LogDomain => pot.gauge_fixed(),
        SolveMode::ScalingDomain => scal.to_potentials().gauge_fixed(),
    };
    let scalings = potentials.to_scalings();
    Ok(Solution {
        potentials,
        scalings,
        trace: SolveTrace {
            records,
            status,
            iterations,
            final_residual,
        },
    })
}

/// Integrates the coupled (unsplit) flow from `f = g = 0` with classical RK4.
///
/// Returns `(s, state)` samples at every step, starting with `s = 0`. The
/// number of steps is `round(s_end / ds)` (at least one) and the step is
/// adjusted to land on `s_end` exactly.
pub fn integrate_reference(problem: &ProblemInstance, s_end: f64, ds: f64) -> Result<Vec<(f64, Potentials)>> {
    let k = problem.kernel()?;
    let (n0, n1) = k.shape();
    integrate_reference_from(&k, problem.mass0(), problem.mass1(), &Potentials::zeros(n0, n1), s_end, ds)
}

pub fn integrate_reference_from(
    k: &KernelOperator,
    mass0: &Array1<f64>,
    mass1: &Array1<f64>,
    init: &Potentials,
    s_end: f64,
    ds: f64,
) -> Result<Vec<(f64, Potentials)>> {
    check_shapes(k, init.f.len(), init.g.len(), "initial potentials")?;
    check_masses(k, mass0, mass1)?;
    let rhs = |p: &Potentials| {
        let (df, dg) = MarginalState::from_potentials(p, k).rhs(mass0, mass1);
        Potentials { f: df, g: dg }
    };
    rk4_trajectory(init, s_end, ds, rhs)
}

pub(crate) fn rk4_trajectory<F>(init: &Potentials, s_end: f64, ds: f64, rhs: F) -> Result<Vec<(f64, Potentials)>>
where
    F: Fn(&Potentials) -> Potentials,
{
    if !(ds > 0.0 && ds.is_finite()) {
        return Err(Error::NonPositiveStep(ds));
    }
    if !(s_end >= 0.0 && s_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("s_end must be nonnegative, got {s_end}")));
    }
    let steps = ((s_end / ds).round() as usize).max(1);
    let step = s_end / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    let mut state = init.clone();
    out.push((0.0, state.clone()));
    let axpy = |base: &Potentials, c: f64, d: &Potentials| Potentials {
        f: &base.f + &(&d.f * c),
        g: &base.g + &(&d.g * c),
    };
    for n in 1..=steps {
        let k1 = rhs(&state);
        let k2 = rhs(&axpy(&state, 0.5 * step, &k1));
        let k3 = rhs(&axpy(&state, 0.5 * step, &k2));
        let k4 = rhs(&axpy(&state, step, &k3));
        let w = step / 6.0;
        state = Potentials {
            f: &state.f + &((&k1.f + &(&k2.f * 2.0) + &(&k3.f * 2.0) + &k4.f) * w),
            g: &state.g + &((&k1.g + &(&k2.g * 2.0) + &(&k3.g * 2.0) + &k4.g) * w),
        };
        if !state.is_finite() {
            return Err(Error::NonFinite(format!("reference trajectory at step {n}")));
        }
        out.push((n as f64 * step, state.clone()));
    }
    Ok(out)
}
