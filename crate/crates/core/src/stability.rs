//! Linear stability of the sequential Trotter–Euler splitting on the test
//! equation `ẋ = −x − (1−δ)y`, `ẏ = −(1−δ)x − y`.
//!
//! The flow map is discretized in the same order as the transport iteration:
//! `x⁺ = (1−h)x − h(1−δ)y`, then `y⁺ = −h(1−δ)x⁺ + (1−h)y`. Its determinant is
//! `(1−h)²`, so once the two eigenvalues form a complex pair both have
//! magnitude `|1−h|` and stability is lost at `h = 2`.

use serde::Serialize;

use crate::error::{Error, Result};

pub type Mat2 = [[f64; 2]; 2];

/// Tolerance of the golden-section refinement of the optimal step.
pub const OPTIMAL_STEP_TOL: f64 = 1e-4;
const ONSET_TOL: f64 = 1e-12;

/// Eigenvalue in polar form; real eigenvalues have phase `0` or `π`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Eigenvalue {
    pub magnitude: f64,
    pub phase: f64,
}

impl Eigenvalue {
    fn real(v: f64) -> Self {
        Self {
            magnitude: v.abs(),
            phase: if v < 0.0 { std::f64::consts::PI } else { 0.0 },
        }
    }
}

pub fn test_equation_flow_map(h: f64, delta: f64) -> Mat2 {
    let c = 1.0 - delta;
    let r = 1.0 - h;
    [[r, -h * c], [-h * c * r, r + h * h * c * c]]
}

/// Both eigenvalues of a 2×2 matrix from its trace and determinant, larger
/// magnitude first.
pub fn eigenvalues(m: &Mat2) -> [Eigenvalue; 2] {
    eigenvalues_from(m[0][0] + m[1][1], m[0][0] * m[1][1] - m[0][1] * m[1][0])
}

fn eigenvalues_from(tr: f64, det: f64) -> [Eigenvalue; 2] {
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        // Larger-magnitude root first, the other via det / λ₁ to avoid cancellation.
        let big = 0.5 * (tr + tr.signum() * s);
        let big = if tr == 0.0 { 0.5 * s } else { big };
        let small = if big != 0.0 { det / big } else { 0.0 };
        let (e1, e2) = (Eigenvalue::real(big), Eigenvalue::real(small));
        if e1.magnitude >= e2.magnitude {
            [e1, e2]
        } else {
            [e2, e1]
        }
    } else {
        let magnitude = det.sqrt();
        let phase = (0.5 * (-disc).sqrt()).atan2(0.5 * tr);
        [
            Eigenvalue { magnitude, phase },
            Eigenvalue {
                magnitude,
                phase: -phase,
            },
        ]
    }
}

pub fn spectral_radius(m: &Mat2) -> f64 {
    eigenvalues(m)[0].magnitude
}

/// Eigenvalues of the test-equation map, using `det = (1−h)²` exactly (the
/// map is a product of two triangular factors with diagonal `1−h`), so the
/// complex-pair magnitude is exactly `|1−h|`.
pub fn test_equation_eigenvalues(h: f64, delta: f64) -> [Eigenvalue; 2] {
    let m = test_equation_flow_map(h, delta);
    eigenvalues_from(m[0][0] + m[1][1], (1.0 - h) * (1.0 - h))
}

fn radius_at(h: f64, delta: f64) -> f64 {
    test_equation_eigenvalues(h, delta)[0].magnitude
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub delta: f64,
    pub h_values: Vec<f64>,
    pub radii: Vec<f64>,
    pub eigenvalues: Vec<[Eigenvalue; 2]>,
    pub h_optimal: f64,
    pub radius_optimal: f64,
    /// Smallest `h > 0` with radius `≥ 1`; `None` if the grid never reaches it.
    pub h_unstable_onset: Option<f64>,
}

/// Tabulates the spectral radius on `steps` equal intervals of
/// `[h_min, h_max]`, refines the minimizer by golden-section search and the
/// instability onset by bisection on `radius = 1`.
pub fn scan_stability(delta: f64, h_min: f64, h_max: f64, steps: usize) -> Result<StabilityReport> {
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    if !(h_min >= 0.0 && h_max > h_min && h_max.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= h_min < h_max, got [{h_min}, {h_max}]"
        )));
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidArgument(format!("delta must lie in [0, 1], got {delta}")));
    }
    let width = h_max - h_min;
    let h_values: Vec<f64> = (0..=steps)
        .map(|k| h_min + width * k as f64 / steps as f64)
        .collect();
    let eigs: Vec<[Eigenvalue; 2]> = h_values
        .iter()
        .map(|&h| test_equation_eigenvalues(h, delta))
        .collect();
    let radii: Vec<f64> = eigs.iter().map(|e| e[0].magnitude).collect();

    let best = radii
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let lo = h_values[best.saturating_sub(1)];
    let hi = h_values[(best + 1).min(steps)];
    let (mut h_optimal, mut radius_optimal) = golden_section(|h| radius_at(h, delta), lo, hi, OPTIMAL_STEP_TOL);
    if radii[best] < radius_optimal {
        h_optimal = h_values[best];
        radius_optimal = radii[best];
    }

    let h_unstable_onset = h_values
        .iter()
        .zip(&radii)
        .position(|(&h, &r)| h > 0.0 && r >= 1.0)
        .map(|k| {
            if k == 0 || (h_values[k - 1] > 0.0 && radii[k - 1] >= 1.0) {
                return h_values[k];
            }
            // radius < 1 on (lo, lo + tiny], ≥ 1 at hi; h = 0 itself is neutral
            let (mut lo, mut hi) = (h_values[k - 1], h_values[k]);
            while hi - lo > ONSET_TOL {
                let mid = 0.5 * (lo + hi);
                if radius_at(mid, delta) >= 1.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi
        });

    Ok(StabilityReport {
        delta,
        h_values,
        radii,
        eigenvalues: eigs,
        h_optimal,
        radius_optimal,
        h_unstable_onset,
    })
}

fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}
