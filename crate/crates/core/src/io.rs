//! Config files and output artifacts.
//!
//! Configs are JSON: a problem (`domain`, `epsilon`, `mu0`, `mu1`) plus an
//! optional `solver` block. Traces, plans, stability tables and bridge
//! densities are CSV with every float written as `{:.16e}` (17 significant
//! digits), so identical inputs give byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interpolation::BridgeDensity;
use crate::problem::{ProblemInstance, ProblemJson};
use crate::sinkhorn::{Solution, SolveConfig, SolveMode, SolveTrace};
use crate::stability::StabilityReport;

pub const TRACE_HEADER: &str = "iter,residual_l2,coupling_mass,F1,F2";
pub const STABILITY_HEADER: &str = "h,radius,eig1_abs,eig2_abs";
pub const SWEEP_HEADER: &str = "h,iters_to_tol,final_residual,status";

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Optional `"solver"` block of a config file.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<SolveMode>,
}

impl SolverJson {
    pub fn to_config(&self) -> SolveConfig {
        let d = SolveConfig::default();
        SolveConfig {
            h: self.h.unwrap_or(d.h),
            tol: self.tol.unwrap_or(d.tol),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            mode: self.mode.unwrap_or(d.mode),
            record_trace: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConfigJson {
    #[serde(flatten)]
    pub problem: ProblemJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverJson>,
}

/// A parsed and validated config file.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub problem: ProblemInstance,
    pub solver: SolveConfig,
}

impl RunConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: ConfigJson = serde_json::from_str(s)?;
        let solver = raw.solver.unwrap_or_default().to_config();
        solver.validate()?;
        Ok(Self {
            problem: raw.problem.into_problem()?,
            solver,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&fs::read_to_string(path)?)
    }
}

pub fn trace_csv(trace: &SolveTrace) -> String {
    let mut s = String::from(TRACE_HEADER);
    s.push('\n');
    for r in &trace.records {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.iter,
            fmt_f64(r.residual_l2),
            fmt_f64(r.coupling_mass),
            fmt_f64(r.f1),
            fmt_f64(r.f2)
        );
    }
    s
}

/// One line per plan row, no header.
pub fn matrix_csv(m: &Array2<f64>) -> String {
    let mut s = String::new();
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

pub fn stability_csv(report: &StabilityReport) -> String {
    let mut s = String::from(STABILITY_HEADER);
    s.push('\n');
    for ((h, r), e) in report.h_values.iter().zip(&report.radii).zip(&report.eigenvalues) {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            fmt_f64(*h),
            fmt_f64(*r),
            fmt_f64(e[0].magnitude),
            fmt_f64(e[1].magnitude)
        );
    }
    s
}

fn coord_names(dim: usize) -> Vec<String> {
    match dim {
        1 => vec!["x".into()],
        2 => vec!["x".into(), "y".into()],
        3 => vec!["x".into(), "y".into(), "z".into()],
        _ => (0..dim).map(|d| format!("x{d}")).collect(),
    }
}

/// Columns `t, x[, y, ...], rho`, one row per time and grid point.
pub fn bridge_csv(bridge: &BridgeDensity) -> String {
    let pts = bridge.grid.points();
    let mut s = format!("t,{},rho\n", coord_names(bridge.grid.dim()).join(","));
    for (ti, &t) in bridge.times.iter().enumerate() {
        for (pi, p) in pts.rows().into_iter().enumerate() {
            let coords: Vec<String> = p.iter().map(|&v| fmt_f64(v)).collect();
            let _ = writeln!(
                s,
                "{},{},{}",
                fmt_f64(t),
                coords.join(","),
                fmt_f64(bridge.values[[ti, pi]])
            );
        }
    }
    s
}

/// Contents of `solution.json`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SolutionJson {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub status: String,
    pub iters: usize,
    pub residual: f64,
}

impl SolutionJson {
    pub fn from_solution(sol: &Solution) -> Self {
        Self {
            f: sol.potentials.f.to_vec(),
            g: sol.potentials.g.to_vec(),
            a: sol.scalings.a.to_vec(),
            b: sol.scalings.b.to_vec(),
            status: sol.status().as_str().to_string(),
            iters: sol.iterations(),
            residual: sol.residual(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StabilitySummaryJson {
    pub delta: f64,
    pub h_optimal: f64,
    pub radius_optimal: f64,
    pub h_unstable_onset: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BeurlingReportJson {
    pub roundtrip_err: f64,
    pub uniqueness_err: f64,
    pub log_kernel_quantity: f64,
}

pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, contents)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_text(path, &s)
}

/// Parses a CSV with a header line into `(header, rows of floats)`. Empty
/// fields and non-numeric fields (status columns) are read as NaN.
pub fn read_numeric_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidArgument("empty CSV".into()))?
        .split(',')
        .map(str::to_string)
        .collect::<Vec<_>>();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let row: Vec<f64> = l.split(',').map(|f| f.parse::<f64>().unwrap_or(f64::NAN)).collect();
            if row.len() != header.len() {
                return Err(Error::ShapeMismatch(format!(
                    "CSV row has {} fields, header has {}",
                    row.len(),
                    header.len()
                )));
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((header, rows))
}
