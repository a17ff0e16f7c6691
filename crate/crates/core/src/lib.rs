//! # sinkflow
//!
//! Entropic optimal transport between atomic measures, with the Sinkhorn
//! iteration read as a time discretization of a nonlinear flow driven by the
//! heat semigroup.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`kernels`] | heat kernels on `ℝⁿ` and the flat torus, kernel matrices, semigroup products |
//! | [`problem`] | atomic marginals, validation, random instances, JSON problem format |
//! | [`sinkhorn`] | flow right-hand sides, the step-size family of splitting steps, solver, RK4 reference |
//! | [`stability`] | spectral radius of the splitting on the linear test equation |
//! | [`diagnostics`] | coupling mass, relative entropies, Fisher–Rao norm, `T_ε`, grid entropy/Fisher information |
//! | [`interpolation`] | entropic interpolation `ρₜ` from forward/backward heat flows |
//! | [`beurling`] | product measures and the generalized-marginal map `T_ε` |
//! | [`io`], [`cli`] | config files, CSV/JSON artifacts, the `sinkflow` command |
//!
//! ```
//! use sinkflow::{kernels::DomainSpec, problem::random_instance, sinkhorn::{solve, SolveConfig, SolveStatus}};
//!
//! let domain = DomainSpec::euclidean(2).unwrap();
//! let problem = random_instance(7, 20, &domain, 0.05).unwrap();
//! let sol = solve(&problem, &SolveConfig { h: 1.5, ..SolveConfig::default() }).unwrap();
//! assert_eq!(sol.status(), SolveStatus::Converged);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beurling;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod interpolation;
pub mod io;
pub mod kernels;
pub mod problem;
pub mod sinkhorn;
pub mod stability;

pub use error::{Error, Result};
pub use kernels::{build_kernel_matrix, heat_kernel_eval, DomainSpec, KernelOperator};
pub use problem::{random_instance, validate_problem, AtomicMeasure, ProblemInstance};
pub use sinkhorn::{solve, Potentials, Scalings, Solution, SolveConfig, SolveMode, SolveStatus};
