//! Heat kernels on Euclidean space and the flat torus, dense kernel matrices,
//! and the discrete heat semigroup.
//!
//! The diffusivity convention follows the heat equation `∂ₜu = Δu` run for
//! time `ε`:
//!
//! ```text
//! K_ε(x, y) = (4πε)^{-n/2} · exp(-|x - y|² / (4ε))
//! ```
//!
//! so the Gaussian has variance `2ε` per coordinate. Code written against the
//! machine-learning convention `exp(-c(x, y) / λ)` with `c = |x - y|²` maps
//! over with `λ = 4ε`; the prefactor only rescales the scalings.
//!
//! On the flat torus the kernel is the periodized Gaussian, truncated to the
//! lattice images `k` with `|k|_∞ ≤ image_count`. The box of images is a
//! product set, so the truncated sum factorizes into one 1-D image sum per
//! axis. With `r ≤ L/2` the wrapped distance along an axis, the first
//! omitted image sits at distance at least `(m + 1/2)·L`, so the relative
//! truncation error is bounded by roughly `2·exp(-((m + 1/2)L)² / (4ε))` per
//! axis. For `m = 5` and `ε ≤ L²/8` that is below `1e-26`.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Default truncation radius of the torus image sum.
pub const DEFAULT_IMAGE_COUNT: usize = 5;

/// The manifold the marginals live on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DomainSpec {
    /// `ℝⁿ` with the Gaussian heat kernel.
    Euclidean { dim: usize },
    /// `ℝⁿ / (L₁ℤ × … × Lₙℤ)` with the truncated periodized Gaussian.
    FlatTorus { periods: Vec<f64>, image_count: usize },
}

impl DomainSpec {
    pub fn euclidean(dim: usize) -> Result<Self> {
        let d = DomainSpec::Euclidean { dim };
        d.validate()?;
        Ok(d)
    }

    pub fn flat_torus(periods: Vec<f64>, image_count: usize) -> Result<Self> {
        let d = DomainSpec::FlatTorus {
            periods,
            image_count,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Euclidean { dim } => *dim,
            DomainSpec::FlatTorus { periods, .. } => periods.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DomainSpec::Euclidean { dim } => {
                if *dim == 0 {
                    return Err(Error::InvalidDomain("dim must be at least 1".into()));
                }
            }
            DomainSpec::FlatTorus {
                periods,
                image_count,
            } => {
                if periods.is_empty() {
                    return Err(Error::InvalidDomain("dim must be at least 1".into()));
                }
                if periods.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
                    return Err(Error::InvalidDomain(
                        "every torus period must be positive".into(),
                    ));
                }
                if *image_count == 0 {
                    return Err(Error::InvalidDomain(
                        "image_count must be at least 1 on the torus".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveEpsilon(epsilon))
    }
}

fn check_point(domain: &DomainSpec, p: &[f64]) -> Result<()> {
    if p.len() != domain.dim() {
        return Err(Error::DimensionMismatch {
            expected: domain.dim(),
            got: p.len(),
        });
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("point coordinate".into()));
    }
    Ok(())
}

/// Log of the 1-D periodized Gaussian image sum (without prefactor).
///
/// The distance is folded to `r ∈ [0, L/2]` from `|x - y|`, which keeps the
/// result bit-identical under swapping the arguments.
fn log_periodic_factor(dist: f64, period: f64, image_count: usize, epsilon: f64) -> f64 {
    let folded = dist % period;
    let r = folded.min(period - folded);
    let four_eps = 4.0 * epsilon;
    let lead = r * r / four_eps;
    let m = image_count as i64;
    // k = 0 dominates since r ≤ L/2; every shifted exponent is ≤ 0.
    let mut sum = 0.0;
    for k in -m..=m {
        let s = r + k as f64 * period;
        sum += (-(s * s) / four_eps + lead).exp();
    }
    -lead + sum.ln()
}

fn log_kernel_unchecked(domain: &DomainSpec, epsilon: f64, x: &[f64], y: &[f64]) -> f64 {
    let n = domain.dim() as f64;
    let log_prefactor = -0.5 * n * (4.0 * PI * epsilon).ln();
    match domain {
        DomainSpec::Euclidean { .. } => {
            let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            log_prefactor - d2 / (4.0 * epsilon)
        }
        DomainSpec::FlatTorus {
            periods,
            image_count,
        } => {
            let mut acc = log_prefactor;
            for ((a, b), &period) in x.iter().zip(y).zip(periods) {
                acc += log_periodic_factor((a - b).abs(), period, *image_count, epsilon);
            }
            acc
        }
    }
}

/// `log K_ε(x, y)`; finite even where the kernel value itself underflows.
pub fn log_heat_kernel_eval(domain: &DomainSpec, epsilon: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    check_epsilon(epsilon)?;
    domain.validate()?;
    check_point(domain, x)?;
    check_point(domain, y)?;
    Ok(log_kernel_unchecked(domain, epsilon, x, y))
}

/// Heat kernel `K_ε(x, y)` on the given domain.
pub fn heat_kernel_eval(domain: &DomainSpec, epsilon: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    log_heat_kernel_eval(domain, epsilon, x, y).map(f64::exp)
}

/// Where a kernel matrix came from, kept so `K_{tε}` can be rebuilt.
#[derive(Clone, Debug)]
pub struct KernelGeometry {
    pub domain: DomainSpec,
    pub epsilon: f64,
    pub xs: Array2<f64>,
    pub ys: Array2<f64>,
}

/// Dense matrix of kernel values between two point sets, stored both as
/// values and as logs so that log-domain iterations never exponentiate it.
#[derive(Clone, Debug)]
pub struct KernelOperator {
    geometry: Option<KernelGeometry>,
    entries: Array2<f64>,
    log_entries: Array2<f64>,
}

/// Builds `K[i][j] = K_ε(xs[i], ys[j])`; points are the rows of `xs`, `ys`.
pub fn build_kernel_matrix(
    domain: &DomainSpec,
    epsilon: f64,
    xs: &Array2<f64>,
    ys: &Array2<f64>,
) -> Result<KernelOperator> {
    check_epsilon(epsilon)?;
    domain.validate()?;
    if xs.nrows() == 0 || ys.nrows() == 0 {
        return Err(Error::EmptyPointSet);
    }
    for pts in [xs, ys] {
        if pts.ncols() != domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: domain.dim(),
                got: pts.ncols(),
            });
        }
        if pts.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("point coordinate".into()));
        }
    }
    let xs_std = xs.as_standard_layout();
    let ys_std = ys.as_standard_layout();
    let log_entries = Array2::from_shape_fn((xs.nrows(), ys.nrows()), |(i, j)| {
        let x = xs_std.row(i);
        let y = ys_std.row(j);
        log_kernel_unchecked(
            domain,
            epsilon,
            x.as_slice().expect("standard layout row"),
            y.as_slice().expect("standard layout row"),
        )
    });
    let entries = log_entries.mapv(f64::exp);
    Ok(KernelOperator {
        geometry: Some(KernelGeometry {
            domain: domain.clone(),
            epsilon,
            xs: xs.to_owned(),
            ys: ys.to_owned(),
        }),
        entries,
        log_entries,
    })
}

impl KernelOperator {
    /// Wraps an arbitrary positive matrix (no geometry attached).
    pub fn from_entries(entries: Array2<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        if entries.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument(
                "kernel entries must be positive and finite".into(),
            ));
        }
        let log_entries = entries.mapv(f64::ln);
        Ok(Self {
            geometry: None,
            entries,
            log_entries,
        })
    }

    /// Wraps a matrix of log-kernel values (no geometry attached).
    pub fn from_log_entries(log_entries: Array2<f64>) -> Result<Self> {
        if log_entries.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        if log_entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("log kernel entry".into()));
        }
        let entries = log_entries.mapv(f64::exp);
        Ok(Self {
            geometry: None,
            entries,
            log_entries,
        })
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn log_entries(&self) -> &Array2<f64> {
        &self.log_entries
    }

    pub fn geometry(&self) -> Option<&KernelGeometry> {
        self.geometry.as_ref()
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.geometry.as_ref().map(|g| g.epsilon)
    }

    /// `(rows, cols)` = `(|xs|, |ys|)`.
    pub fn shape(&self) -> (usize, usize) {
        self.entries.dim()
    }

    /// The operator with the roles of the two point sets exchanged.
    pub fn transposed(&self) -> Self {
        Self {
            geometry: self.geometry.as_ref().map(|g| KernelGeometry {
                domain: g.domain.clone(),
                epsilon: g.epsilon,
                xs: g.ys.clone(),
                ys: g.xs.clone(),
            }),
            entries: self.entries.t().to_owned(),
            log_entries: self.log_entries.t().to_owned(),
        }
    }

    /// Materializes `K_{tε}` on the same point sets.
    pub fn at_time_fraction(&self, t: f64) -> Result<Self> {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "time fraction must lie in (0, 1], got {t}"
            )));
        }
        let g = self.geometry.as_ref().ok_or_else(|| {
            Error::InvalidArgument("kernel has no geometry to rescale".into())
        })?;
        build_kernel_matrix(&g.domain, t * g.epsilon, &g.xs, &g.ys)
    }

    fn input_len(&self, transpose: bool) -> usize {
        let (r, c) = self.shape();
        if transpose {
            r
        } else {
            c
        }
    }

    fn check_len(&self, len: usize, transpose: bool) -> Result<()> {
        let want = self.input_len(transpose);
        if len != want {
            return Err(Error::ShapeMismatch(format!(
                "vector of length {len} applied to kernel of shape {:?}{}",
                self.shape(),
                if transpose { " (transposed)" } else { "" }
            )));
        }
        Ok(())
    }

    /// `K·w` (or `Kᵀ·w`), the heat semigroup applied to an atomic measure.
    pub fn apply_semigroup(&self, w: ArrayView1<f64>, transpose: bool) -> Result<Array1<f64>> {
        self.check_len(w.len(), transpose)?;
        if w.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "semigroup input must be nonnegative and finite".into(),
            ));
        }
        if !w.iter().any(|&v| v > 0.0) {
            return Err(Error::ZeroMass);
        }
        Ok(self.apply_unchecked(w, transpose))
    }

    pub(crate) fn apply_unchecked(&self, w: ArrayView1<f64>, transpose: bool) -> Array1<f64> {
        if transpose {
            self.entries.t().dot(&w)
        } else {
            self.entries.dot(&w)
        }
    }

    /// Componentwise `log(K·exp g)` (or with `Kᵀ`) by shifted exponential sums.
    pub fn log_apply_semigroup(&self, g: ArrayView1<f64>, transpose: bool) -> Result<Array1<f64>> {
        self.check_len(g.len(), transpose)?;
        if g.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::NonFinite("log-domain input".into()));
        }
        Ok(self.log_apply_unchecked(g, transpose))
    }

    pub(crate) fn log_apply_unchecked(&self, g: ArrayView1<f64>, transpose: bool) -> Array1<f64> {
        let lanes = if transpose {
            self.log_entries.axis_iter(Axis(1))
        } else {
            self.log_entries.axis_iter(Axis(0))
        };
        lanes
            .map(|row| logsumexp_shifted(row, g))
            .collect::<Array1<f64>>()
    }
}

/// `log Σ_j exp(row_j + g_j)` with the running maximum factored out.
pub(crate) fn logsumexp_shifted(row: ArrayView1<f64>, g: ArrayView1<f64>) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for (l, v) in row.iter().zip(g.iter()) {
        let s = l + v;
        if s > m {
            m = s;
        }
    }
    if m == f64::NEG_INFINITY {
        return m;
    }
    let sum: f64 = row
        .iter()
        .zip(g.iter())
        .map(|(l, v)| (l + v - m).exp())
        .sum();
    m + sum.ln()
}
