//! `sinkflow` command-line driver.
//!
//! Exit codes: 0 on success (including `MaxIter`, which is flagged in the
//! output), 1 for invalid configs or arguments, 2 for divergence and other
//! failures raised while computing.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::beurling::{
    invert_t_epsilon, invert_t_epsilon_from, log_kernel_integrability, outer_relative_error, t_epsilon_map,
    ProductMeasure,
};
use crate::error::Error;
use crate::interpolation::{bridge_density_from_potentials, default_grid, EvalGrid, GridAxis};
use crate::io::{
    bridge_csv, fmt_f64, matrix_csv, stability_csv, trace_csv, write_json, write_text, BeurlingReportJson,
    ConfigJson, RunConfig, SolutionJson, SolverJson, StabilitySummaryJson, SWEEP_HEADER,
};
use crate::kernels::{DomainSpec, DEFAULT_IMAGE_COUNT};
use crate::problem::{random_instance, ProblemJson};
use crate::sinkhorn::{plan_from_potentials, solve, Potentials, SolveConfig, SolveStatus};
use crate::stability::scan_stability;

#[derive(Debug, Parser)]
#[command(name = "sinkflow", version, about = "Entropic optimal transport by heat-kernel flow splitting")]
pub struct Cli {
    /// Problem/config JSON file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Seed for randomized steps.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one problem; writes trace.csv, solution.json, plan.csv.
    Solve,
    /// Scan the spectral radius of the splitting on the linear test equation.
    Stability {
        #[arg(long, default_value_t = 1e-2)]
        delta: f64,
        #[arg(long, default_value_t = 0.0)]
        h_min: f64,
        #[arg(long, default_value_t = 2.5)]
        h_max: f64,
        #[arg(long, default_value_t = 500)]
        steps: usize,
    },
    /// Solve for each step size; writes trace_h<h>.csv files and summary.csv.
    Sweep {
        /// Comma-separated step sizes.
        #[arg(long = "h", value_delimiter = ',', num_args = 0..)]
        h_list: Vec<f64>,
    },
    /// Evaluate the entropic interpolation on a grid; writes bridge.csv.
    Interpolate {
        /// Comma-separated times in (0, 1).
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        times: Vec<f64>,
        /// Per-axis `lo:hi:n`, comma-separated; defaults to the padded bounding box.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        /// Points per axis for the default grid.
        #[arg(long, default_value_t = 401)]
        grid_points: usize,
    },
    /// Round-trip and uniqueness check of the product-measure inversion; writes beurling.json.
    BeurlingCheck {
        #[arg(long, default_value_t = 1e-11)]
        tol: f64,
    },
    /// Write a random problem config to <out>/problem.json.
    Generate {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 1e-2)]
        epsilon: f64,
        /// Use the flat torus with this period on every axis.
        #[arg(long)]
        torus_period: Option<f64>,
    },
}

/// Failure carrying its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn invalid(msg: impl std::fmt::Display) -> Self {
        Self {
            code: 1,
            message: msg.to_string(),
        }
    }

    fn failed(msg: impl std::fmt::Display) -> Self {
        Self {
            code: 2,
            message: msg.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::invalid("--config is required for this command"))?;
    RunConfig::load(path).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

fn io_fail(e: Error) -> CliError {
    CliError::failed(e)
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Solve => cmd_solve(cli),
        Command::Stability {
            delta,
            h_min,
            h_max,
            steps,
        } => cmd_stability(*delta, *h_min, *h_max, *steps, &cli.out),
        Command::Sweep { h_list } => cmd_sweep(cli, h_list),
        Command::Interpolate {
            times,
            grid,
            grid_points,
        } => cmd_interpolate(cli, times, grid.as_deref(), *grid_points),
        Command::BeurlingCheck { tol } => cmd_beurling_check(cli, *tol),
        Command::Generate {
            n,
            dim,
            epsilon,
            torus_period,
        } => cmd_generate(cli, *n, *dim, *epsilon, *torus_period),
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn cmd_solve(cli: &Cli) -> CliResult<()> {
    let cfg = load_config(cli)?;
    let sol = solve(&cfg.problem, &cfg.solver).map_err(CliError::failed)?;
    let k = cfg.problem.kernel().map_err(CliError::failed)?;
    let plan = plan_from_potentials(&sol.potentials, &k).map_err(CliError::failed)?;
    write_text(&cli.out.join("trace.csv"), &trace_csv(&sol.trace)).map_err(io_fail)?;
    write_json(&cli.out.join("solution.json"), &SolutionJson::from_solution(&sol)).map_err(io_fail)?;
    write_text(&cli.out.join("plan.csv"), &matrix_csv(&plan)).map_err(io_fail)?;
    match sol.status() {
        SolveStatus::Diverged => Err(CliError::failed(format!(
            "diverged after {} iterations",
            sol.iterations()
        ))),
        SolveStatus::MaxIter => {
            log::warn!("stopped at max_iter with residual {:e}", sol.residual());
            Ok(())
        }
        SolveStatus::Converged => Ok(()),
    }
}

fn cmd_stability(delta: f64, h_min: f64, h_max: f64, steps: usize, out: &Path) -> CliResult<()> {
    let report = scan_stability(delta, h_min, h_max, steps).map_err(CliError::invalid)?;
    write_text(&out.join("stability.csv"), &stability_csv(&report)).map_err(io_fail)?;
    let summary = StabilitySummaryJson {
        delta,
        h_optimal: report.h_optimal,
        radius_optimal: report.radius_optimal,
        h_unstable_onset: report.h_unstable_onset,
    };
    write_json(&out.join("stability_summary.json"), &summary).map_err(io_fail)
}

/// File name for the trace of one sweep run, e.g. `trace_h1.75.csv`.
pub fn sweep_trace_name(h: f64) -> String {
    format!("trace_h{h}.csv")
}

fn cmd_sweep(cli: &Cli, h_list: &[f64]) -> CliResult<()> {
    if h_list.is_empty() {
        return Err(CliError::invalid("--h needs at least one step size"));
    }
    let cfg = load_config(cli)?;
    let k = cfg.problem.kernel().map_err(CliError::failed)?;
    let configs: Vec<SolveConfig> = h_list
        .iter()
        .map(|&h| {
            let c = SolveConfig { h, ..cfg.solver.clone() };
            c.validate().map(|_| c)
        })
        .collect::<Result<_, _>>()
        .map_err(CliError::invalid)?;

    // Runs are independent; each thread owns its outputs.
    let results: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|c| {
                let k = &k;
                let problem = &cfg.problem;
                scope.spawn(move || {
                    crate::sinkhorn::solve_with_kernel(k, problem.mass0(), problem.mass1(), None, c)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });

    let mut summary = format!("{SWEEP_HEADER}\n");
    for (&h, res) in h_list.iter().zip(results) {
        let sol = res.map_err(CliError::failed)?;
        write_text(&cli.out.join(sweep_trace_name(h)), &trace_csv(&sol.trace)).map_err(io_fail)?;
        let iters = if sol.status() == SolveStatus::Converged {
            sol.iterations().to_string()
        } else {
            String::new()
        };
        summary.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(h),
            iters,
            fmt_f64(sol.residual()),
            sol.status().as_str()
        ));
    }
    write_text(&cli.out.join("summary.csv"), &summary).map_err(io_fail)
}

fn parse_grid(spec: &str) -> CliResult<EvalGrid> {
    let axes = spec
        .split(',')
        .map(|ax| {
            let parts: Vec<&str> = ax.split(':').collect();
            if parts.len() != 3 {
                return Err(CliError::invalid(format!("grid axis '{ax}' is not lo:hi:n")));
            }
            let lo = parts[0].trim().parse::<f64>().map_err(CliError::invalid)?;
            let hi = parts[1].trim().parse::<f64>().map_err(CliError::invalid)?;
            let n = parts[2].trim().parse::<usize>().map_err(CliError::invalid)?;
            Ok(GridAxis { lo, hi, n })
        })
        .collect::<CliResult<Vec<_>>>()?;
    EvalGrid::new(axes).map_err(CliError::invalid)
}

fn cmd_interpolate(cli: &Cli, times: &[f64], grid: Option<&str>, grid_points: usize) -> CliResult<()> {
    let cfg = load_config(cli)?;
    let grid = match grid {
        Some(s) => parse_grid(s)?,
        None => default_grid(&cfg.problem, grid_points).map_err(CliError::invalid)?,
    };
    let sol = solve(&cfg.problem, &cfg.solver).map_err(CliError::failed)?;
    match sol.status() {
        SolveStatus::Diverged => return Err(CliError::failed("solver diverged")),
        SolveStatus::MaxIter => log::warn!("interpolating an unconverged state (residual {:e})", sol.residual()),
        SolveStatus::Converged => {}
    }
    let bridge =
        bridge_density_from_potentials(&sol.potentials, &cfg.problem, times, &grid).map_err(CliError::failed)?;
    write_text(&cli.out.join("bridge.csv"), &bridge_csv(&bridge)).map_err(io_fail)
}

fn cmd_beurling_check(cli: &Cli, tol: f64) -> CliResult<()> {
    let cfg = load_config(cli)?;
    let k = cfg.problem.kernel().map_err(CliError::failed)?;
    let (mu0, mu1) = (cfg.problem.mass0(), cfg.problem.mass1());
    let target = ProductMeasure::new(mu0.clone(), mu1.clone()).map_err(CliError::failed)?;
    let first = invert_t_epsilon(mu0, mu1, &k, tol).map_err(CliError::failed)?;
    let image = t_epsilon_map(&first, &k).map_err(CliError::failed)?;
    let roundtrip_err = outer_relative_error(&image, &target);

    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let start = Potentials {
        f: Array1::from_shape_fn(mu0.len(), |_| rng.gen_range(-2.0..2.0)),
        g: Array1::from_shape_fn(mu1.len(), |_| rng.gen_range(-2.0..2.0)),
    };
    let second = invert_t_epsilon_from(mu0, mu1, &k, tol, Some(&start)).map_err(CliError::failed)?;
    let report = BeurlingReportJson {
        roundtrip_err,
        uniqueness_err: outer_relative_error(&second, &first),
        log_kernel_quantity: log_kernel_integrability(mu0, mu1, &k).map_err(CliError::failed)?,
    };
    write_json(&cli.out.join("beurling.json"), &report).map_err(io_fail)
}

fn cmd_generate(cli: &Cli, n: usize, dim: usize, epsilon: f64, torus_period: Option<f64>) -> CliResult<()> {
    let domain = match torus_period {
        Some(p) => DomainSpec::flat_torus(vec![p; dim], DEFAULT_IMAGE_COUNT),
        None => DomainSpec::euclidean(dim),
    }
    .map_err(CliError::invalid)?;
    let problem = random_instance(cli.seed, n, &domain, epsilon).map_err(CliError::invalid)?;
    let cfg = ConfigJson {
        problem: ProblemJson::from_problem(&problem),
        solver: Some(SolverJson::default()),
    };
    write_json(&cli.out.join("problem.json"), &cfg).map_err(io_fail)
}
