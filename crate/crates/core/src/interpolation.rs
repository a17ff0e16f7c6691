//! Entropic interpolation between the two marginals.
//!
//! With converged scalings `(a, b)` the interpolating density is
//! `ρₜ = (e^{tεΔ}a)·(e^{(1−t)εΔ}b)`: `a` diffuses forward from the support of
//! `mu0`, `b` from the support of `mu1`, and the two heat flows are coupled
//! only through the fixed-point conditions at the endpoints. By the semigroup
//! property `∫ρₜ = Σᵢⱼ aᵢ K_ε(xᵢ, yⱼ) bⱼ` for every `t`.
//!
//! Atomic scalings are not pointwise evaluable, so `t ∈ {0, 1}` is rejected.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::kernels::{build_kernel_matrix, DomainSpec};
use crate::problem::ProblemInstance;
use crate::sinkhorn::{Potentials, Scalings};

/// Padding of the default grid, in units of `sqrt(2ε)`.
pub const DEFAULT_PADDING_SIGMAS: f64 = 6.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl GridAxis {
    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / self.n as f64
    }

    /// Midpoint of cell `i`.
    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.spacing()
    }
}

/// Tensor grid of cell midpoints; the last axis varies fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalGrid {
    pub axes: Vec<GridAxis>,
}

impl EvalGrid {
    pub fn new(axes: Vec<GridAxis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidArgument("grid needs at least one axis".into()));
        }
        for ax in &axes {
            if ax.n == 0 || !(ax.hi > ax.lo) || !ax.lo.is_finite() || !ax.hi.is_finite() {
                return Err(Error::InvalidArgument(format!("bad grid axis {ax:?}")));
            }
        }
        Ok(Self { axes })
    }

    pub fn uniform_1d(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(vec![GridAxis { lo, hi, n }])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(GridAxis::spacing).product()
    }

    pub fn points(&self) -> Array2<f64> {
        let dim = self.dim();
        let mut pts = Array2::zeros((self.len(), dim));
        for (row, mut p) in pts.rows_mut().into_iter().enumerate() {
            let mut rem = row;
            for d in (0..dim).rev() {
                let ax = &self.axes[d];
                p[d] = ax.center(rem % ax.n);
                rem /= ax.n;
            }
        }
        pts
    }

    /// Midpoint-rule integral of values sampled on this grid.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>() * self.cell_volume()
    }
}

/// Grid covering the problem: the bounding box of both supports padded by
/// `6·sqrt(2ε)` on Euclidean domains, the fundamental cell on the torus.
pub fn default_grid(problem: &ProblemInstance, n_per_axis: usize) -> Result<EvalGrid> {
    let dim = problem.domain.dim();
    let axes = match &problem.domain {
        DomainSpec::Euclidean { .. } => {
            let pad = DEFAULT_PADDING_SIGMAS * (2.0 * problem.epsilon).sqrt();
            (0..dim)
                .map(|d| {
                    let coords = problem.mu0.points.column(d).to_vec();
                    let coords2 = problem.mu1.points.column(d).to_vec();
                    let all = coords.iter().chain(coords2.iter());
                    let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
                    let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
                    GridAxis {
                        lo: lo - pad,
                        hi: hi + pad,
                        n: n_per_axis,
                    }
                })
                .collect()
        }
        DomainSpec::FlatTorus { periods, .. } => periods
            .iter()
            .map(|&p| GridAxis {
                lo: 0.0,
                hi: p,
                n: n_per_axis,
            })
            .collect(),
    };
    EvalGrid::new(axes)
}

fn check_time_scale(t_eps: f64) -> Result<()> {
    if t_eps == 0.0 {
        return Err(Error::NotPointwiseEvaluable);
    }
    if !(t_eps > 0.0 && t_eps.is_finite()) {
        return Err(Error::NonPositiveEpsilon(t_eps));
    }
    Ok(())
}

/// `(e^{tεΔ}a)(x) = Σᵢ aᵢ K_{tε}(x, xᵢ)` on the grid; `t_eps` is the product `tε`.
pub fn evolve_scaling(
    weights: &Array1<f64>,
    source_points: &Array2<f64>,
    t_eps: f64,
    grid: &EvalGrid,
    domain: &DomainSpec,
) -> Result<Array1<f64>> {
    check_time_scale(t_eps)?;
    if weights.len() != source_points.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "{} weights for {} points",
            weights.len(),
            source_points.nrows()
        )));
    }
    if grid.dim() != domain.dim() {
        return Err(Error::DimensionMismatch {
            expected: domain.dim(),
            got: grid.dim(),
        });
    }
    let k = build_kernel_matrix(domain, t_eps, &grid.points(), source_points)?;
    k.apply_semigroup(weights.view(), false)
}

/// `log(e^{tεΔ} exp f)` on grid points, for log-scalings that would overflow.
fn log_evolve(
    log_weights: &Array1<f64>,
    source_points: &Array2<f64>,
    t_eps: f64,
    grid_points: &Array2<f64>,
    domain: &DomainSpec,
) -> Result<Array1<f64>> {
    check_time_scale(t_eps)?;
    let k = build_kernel_matrix(domain, t_eps, grid_points, source_points)?;
    k.log_apply_semigroup(log_weights.view(), false)
}

/// Interpolating densities `values[t][x] = ρₜ(x)` on a grid.
#[derive(Clone, Debug)]
pub struct BridgeDensity {
    pub times: Vec<f64>,
    pub grid: EvalGrid,
    pub values: Array2<f64>,
    pub epsilon: f64,
}

impl BridgeDensity {
    /// Midpoint-rule mass of `ρₜ` for the `idx`-th time.
    pub fn mass(&self, idx: usize) -> f64 {
        self.values.row(idx).sum() * self.grid.cell_volume()
    }
}

pub fn bridge_density(
    s: &Scalings,
    problem: &ProblemInstance,
    times: &[f64],
    grid: &EvalGrid,
) -> Result<BridgeDensity> {
    bridge_density_from_potentials(&s.to_potentials(), problem, times, grid)
}

/// Same as [`bridge_density`], working from log-scalings throughout.
pub fn bridge_density_from_potentials(
    p: &Potentials,
    problem: &ProblemInstance,
    times: &[f64],
    grid: &EvalGrid,
) -> Result<BridgeDensity> {
    if p.f.len() != problem.mu0.len() || p.g.len() != problem.mu1.len() {
        return Err(Error::ShapeMismatch("potentials do not match the problem".into()));
    }
    if !p.is_finite() {
        return Err(Error::NonFinite("potentials".into()));
    }
    if let Some(&t) = times.iter().find(|&&t| !(t > 0.0 && t < 1.0)) {
        return Err(Error::EndpointTime(t));
    }
    if grid.dim() != problem.domain.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.domain.dim(),
            got: grid.dim(),
        });
    }
    let pts = grid.points();
    let eps = problem.epsilon;
    let mut values = Array2::zeros((times.len(), grid.len()));
    for (row, &t) in values.rows_mut().into_iter().zip(times) {
        let la = log_evolve(&p.f, &problem.mu0.points, t * eps, &pts, &problem.domain)?;
        let lb = log_evolve(&p.g, &problem.mu1.points, (1.0 - t) * eps, &pts, &problem.domain)?;
        let mut row = row;
        row.assign(&(&la + &lb).mapv(f64::exp));
    }
    Ok(BridgeDensity {
        times: times.to_vec(),
        grid: grid.clone(),
        values,
        epsilon: eps,
    })
}
