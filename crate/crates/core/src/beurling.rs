//! Product measures on a discrete product space and the quadratic map
//! `T_ε: ν ↦ ν₀ ∧ ν₁` sending a measure to the product of its kernel-weighted
//! generalized marginals.
//!
//! A product measure `α ∧ β` only determines its components up to
//! `(c·α, β/c)`. Representatives are canonicalized by `Σα = Σβ` and compared
//! through the outer product `α βᵀ`, which is gauge-free.

use ndarray::{Array1, Array2, Zip};

use crate::error::{Error, Result};
use crate::kernels::KernelOperator;
use crate::problem::MASS_BALANCE_RTOL;
use crate::sinkhorn::{solve_with_kernel, Potentials, SolveConfig, SolveMode, SolveStatus};

/// Iteration cap used by [`invert_t_epsilon`].
pub const INVERT_MAX_ITER: usize = 200_000;

#[derive(Clone, Debug, PartialEq)]
pub struct ProductMeasure {
    pub alpha: Array1<f64>,
    pub beta: Array1<f64>,
}

impl ProductMeasure {
    pub fn new(alpha: Array1<f64>, beta: Array1<f64>) -> Result<Self> {
        if alpha.is_empty() || beta.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        if alpha.iter().chain(beta.iter()).any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::NonPositiveWeight);
        }
        Ok(Self { alpha, beta }.canonical())
    }

    /// Representative with `Σα = Σβ`.
    pub fn canonical(&self) -> Self {
        let c = (self.beta.sum() / self.alpha.sum()).sqrt();
        Self {
            alpha: &self.alpha * c,
            beta: &self.beta / c,
        }
    }

    pub fn outer(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.alpha.len(), self.beta.len()));
        Zip::indexed(&mut out).for_each(|(i, j), v| *v = self.alpha[i] * self.beta[j]);
        out
    }
}

/// A nonnegative measure on the product of the two point sets.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralMeasure {
    pub nu: Array2<f64>,
}

impl GeneralMeasure {
    pub fn new(nu: Array2<f64>) -> Result<Self> {
        if nu.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        if nu.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidArgument("measure entries must be nonnegative".into()));
        }
        if !nu.iter().any(|&v| v > 0.0) {
            return Err(Error::ZeroMass);
        }
        Ok(Self { nu })
    }
}

impl From<&ProductMeasure> for GeneralMeasure {
    fn from(pm: &ProductMeasure) -> Self {
        Self { nu: pm.outer() }
    }
}

/// `ν₀ᵢ = Σⱼ Kᵢⱼ νᵢⱼ`, `ν₁ⱼ = Σᵢ Kᵢⱼ νᵢⱼ`.
pub fn generalized_marginals(nu: &GeneralMeasure, k: &KernelOperator) -> Result<(Array1<f64>, Array1<f64>)> {
    if nu.nu.dim() != k.shape() {
        return Err(Error::ShapeMismatch(format!(
            "measure of shape {:?} against kernel of shape {:?}",
            nu.nu.dim(),
            k.shape()
        )));
    }
    let weighted = &nu.nu * k.entries();
    Ok((weighted.sum_axis(ndarray::Axis(1)), weighted.sum_axis(ndarray::Axis(0))))
}

/// `T_ε(α ∧ β) = (α∘(Kβ)) ∧ (β∘(Kᵀα))`, canonicalized.
pub fn t_epsilon_map(pm: &ProductMeasure, k: &KernelOperator) -> Result<ProductMeasure> {
    if k.shape() != (pm.alpha.len(), pm.beta.len()) {
        return Err(Error::ShapeMismatch(format!(
            "product measure of lengths ({}, {}) against kernel of shape {:?}",
            pm.alpha.len(),
            pm.beta.len(),
            k.shape()
        )));
    }
    let alpha = &pm.alpha * &k.apply_unchecked(pm.beta.view(), false);
    let beta = &pm.beta * &k.apply_unchecked(pm.alpha.view(), true);
    ProductMeasure::new(alpha, beta)
}

/// Solves `T_ε(α ∧ β) = μ₀ ∧ μ₁` with the unit-step iteration in log form.
pub fn invert_t_epsilon(
    mu0: &Array1<f64>,
    mu1: &Array1<f64>,
    k: &KernelOperator,
    tol: f64,
) -> Result<ProductMeasure> {
    invert_t_epsilon_from(mu0, mu1, k, tol, None)
}

/// [`invert_t_epsilon`] from a chosen starting point.
pub fn invert_t_epsilon_from(
    mu0: &Array1<f64>,
    mu1: &Array1<f64>,
    k: &KernelOperator,
    tol: f64,
    init: Option<&Potentials>,
) -> Result<ProductMeasure> {
    let (m0, m1) = (mu0.sum(), mu1.sum());
    if (m0 - m1).abs() > MASS_BALANCE_RTOL * m0 {
        return Err(Error::Unbalanced { mass0: m0, mass1: m1 });
    }
    let config = SolveConfig {
        h: 1.0,
        tol,
        max_iter: INVERT_MAX_ITER,
        mode: SolveMode::LogDomain,
        record_trace: false,
    };
    let sol = solve_with_kernel(k, mu0, mu1, init, &config)?;
    match sol.status() {
        SolveStatus::Converged => ProductMeasure::new(sol.scalings.a, sol.scalings.b),
        SolveStatus::Diverged => Err(Error::Diverged {
            iterations: sol.iterations(),
        }),
        SolveStatus::MaxIter => Err(Error::NotConverged {
            iterations: sol.iterations(),
            residual: sol.residual(),
        }),
    }
}

/// `Σᵢⱼ μ₀ᵢ μ₁ⱼ log Kᵢⱼ`, the log-kernel integrability quantity.
pub fn log_kernel_integrability(mu0: &Array1<f64>, mu1: &Array1<f64>, k: &KernelOperator) -> Result<f64> {
    if k.shape() != (mu0.len(), mu1.len()) {
        return Err(Error::ShapeMismatch("marginals do not match the kernel".into()));
    }
    Ok(mu0.dot(&k.log_entries().dot(mu1)))
}

/// Largest entrywise difference of two outer products, relative to the
/// largest entry of `reference`.
pub fn outer_relative_error(candidate: &ProductMeasure, reference: &ProductMeasure) -> f64 {
    let a = candidate.outer();
    let b = reference.outer();
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = Zip::from(&a).and(&b).fold(0.0f64, |m, x, y| m.max((x - y).abs()));
    diff / scale
}
