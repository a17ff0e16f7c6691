//! Information functionals and flow diagnostics.
//!
//! Each half of the flow is a Fisher–Rao gradient flow: with `b` frozen,
//! `∂ₛa = −a·log(a(Kb)/mass0)` is the gradient flow of
//! `F1(a) = H(a∘(Kb) | mass0)` for the metric `Σ (δσ)²/σ`, and likewise for
//! `b`. The gradient-flow identity holds for the generalized relative entropy
//! `H(σ | ρ) = Σ σ log(σ/ρ) − σ + ρ`, which agrees with `Σ σ log(σ/ρ)`
//! whenever `σ` and `ρ` carry the same mass; `F1` and `F2` use it.

use ndarray::{Array1, ArrayView1, Zip};

use crate::error::{Error, Result};
use crate::kernels::{logsumexp_shifted, KernelOperator};
use crate::sinkhorn::{rk4_trajectory, MarginalState, Potentials, Scalings};

fn same_len(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch(format!("{what}: lengths {a} and {b}")));
    }
    Ok(())
}

fn check_scalings(s: &Scalings, k: &KernelOperator) -> Result<()> {
    if k.shape() != (s.a.len(), s.b.len()) {
        return Err(Error::ShapeMismatch(format!(
            "scalings of lengths ({}, {}) against kernel of shape {:?}",
            s.a.len(),
            s.b.len(),
            k.shape()
        )));
    }
    Ok(())
}

/// `C = Σᵢ aᵢ (Kb)ᵢ`, the total mass of the current plan.
pub fn coupling_mass(s: &Scalings, k: &KernelOperator) -> Result<f64> {
    check_scalings(s, k)?;
    Ok(s.a.dot(&k.apply_unchecked(s.b.view(), false)))
}

/// `dC/ds` along the coupled flow:
/// `−Σ σ₀ log(σ₀/mass0) − Σ σ₁ log(σ₁/mass1)` with `σ₀ = a∘(Kb)`, `σ₁ = b∘(Kᵀa)`.
pub fn coupling_mass_derivative(
    s: &Scalings,
    k: &KernelOperator,
    mass0: &Array1<f64>,
    mass1: &Array1<f64>,
) -> Result<f64> {
    check_scalings(s, k)?;
    same_len(s.a.len(), mass0.len(), "mass0")?;
    same_len(s.b.len(), mass1.len(), "mass1")?;
    let row = &s.a * &k.apply_unchecked(s.b.view(), false);
    let col = &s.b * &k.apply_unchecked(s.a.view(), true);
    let term = |sigma: &Array1<f64>, m: &Array1<f64>| -> f64 {
        Zip::from(sigma).and(m).fold(0.0, |acc, &s, &m| acc + s * (s / m).ln())
    };
    Ok(-term(&row, mass0) - term(&col, mass1))
}

fn check_entropy_args(sigma: ArrayView1<f64>, reference: ArrayView1<f64>) -> Result<()> {
    same_len(sigma.len(), reference.len(), "relative entropy")?;
    if reference.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidArgument("reference measure must be positive".into()));
    }
    if sigma.iter().any(|&s| s < 0.0 || !s.is_finite()) {
        return Err(Error::InvalidArgument("measure must be nonnegative".into()));
    }
    Ok(())
}

fn xlogy_ratio(s: f64, r: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s * (s / r).ln()
    }
}

/// `Σ σᵢ log(σᵢ/refᵢ)` with `0·log 0 = 0`.
pub fn relative_entropy(sigma: ArrayView1<f64>, reference: ArrayView1<f64>) -> Result<f64> {
    check_entropy_args(sigma, reference)?;
    Ok(Zip::from(sigma)
        .and(reference)
        .fold(0.0, |acc, &s, &r| acc + xlogy_ratio(s, r)))
}

/// `Σ σᵢ log(σᵢ/refᵢ) − σᵢ + refᵢ`; nonnegative for any masses.
pub fn generalized_relative_entropy(sigma: ArrayView1<f64>, reference: ArrayView1<f64>) -> Result<f64> {
    check_entropy_args(sigma, reference)?;
    Ok(Zip::from(sigma)
        .and(reference)
        .fold(0.0, |acc, &s, &r| acc + xlogy_ratio(s, r) - s + r))
}

/// Fisher–Rao squared norm `Σ δσᵢ² / σᵢ`.
pub fn fisher_rao_norm(delta_sigma: ArrayView1<f64>, sigma: ArrayView1<f64>) -> Result<f64> {
    same_len(delta_sigma.len(), sigma.len(), "Fisher-Rao norm")?;
    if sigma.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::InvalidArgument("base measure must be positive".into()));
    }
    Ok(Zip::from(delta_sigma)
        .and(sigma)
        .fold(0.0, |acc, &d, &s| acc + d * d / s))
}

/// `(F1, F2) = (H(a∘(Kb) | mass0), H(b∘(Kᵀa) | mass1))` with the generalized
/// relative entropy.
pub fn half_flow_functionals(
    s: &Scalings,
    k: &KernelOperator,
    mass0: &Array1<f64>,
    mass1: &Array1<f64>,
) -> Result<(f64, f64)> {
    check_scalings(s, k)?;
    let row = &s.a * &k.apply_unchecked(s.b.view(), false);
    let col = &s.b * &k.apply_unchecked(s.a.view(), true);
    Ok((
        generalized_relative_entropy(row.view(), mass0.view())?,
        generalized_relative_entropy(col.view(), mass1.view())?,
    ))
}

/// Which half of the flow runs while the other scaling stays frozen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HalfFlow {
    /// `a` evolves, `b` frozen.
    A,
    /// `b` evolves, `a` frozen.
    B,
}

/// Integrates one half of the flow with RK4 in log coordinates.
pub fn integrate_half_flow(
    k: &KernelOperator,
    mass0: &Array1<f64>,
    mass1: &Array1<f64>,
    init: &Potentials,
    which: HalfFlow,
    s_end: f64,
    ds: f64,
) -> Result<Vec<(f64, Potentials)>> {
    if k.shape() != (init.f.len(), init.g.len()) || mass0.len() != init.f.len() || mass1.len() != init.g.len() {
        return Err(Error::ShapeMismatch("half flow inputs".into()));
    }
    let rhs = |p: &Potentials| {
        let (df, dg) = MarginalState::from_potentials(p, k).rhs(mass0, mass1);
        match which {
            HalfFlow::A => Potentials {
                f: df,
                g: Array1::zeros(p.g.len()),
            },
            HalfFlow::B => Potentials {
                f: Array1::zeros(p.f.len()),
                g: dg,
            },
        }
    };
    rk4_trajectory(init, s_end, ds, rhs)
}

/// Discrete `T_ε(f) = log(e^{−f} K̃ e^{f})` where `K̃` is the kernel with rows
/// normalized to sum to one, so that `T_ε(0) = 0`. Requires a square kernel
/// on a single point set.
pub fn t_eps_operator(k: &KernelOperator, f: ArrayView1<f64>) -> Result<Array1<f64>> {
    let (r, c) = k.shape();
    if r != c {
        return Err(Error::ShapeMismatch(format!(
            "T_eps needs a square kernel, got {r}x{c}"
        )));
    }
    same_len(f.len(), c, "T_eps input")?;
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("T_eps input".into()));
    }
    // T is invariant under constant shifts; centering at max f makes that exact.
    let top = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let centered = f.mapv(|v| v - top);
    let zeros = Array1::<f64>::zeros(c);
    Ok(k
        .log_entries()
        .rows()
        .into_iter()
        .zip(centered.iter())
        .map(|(row, &fi)| {
            let norm = logsumexp_shifted(row, zeros.view());
            logsumexp_shifted(row, centered.view()) - norm - fi
        })
        .collect())
}

/// `E(ρ) = ∫ ρ log ρ` by the midpoint rule.
pub fn grid_entropy(density: ArrayView1<f64>, cell_volume: f64) -> Result<f64> {
    if density.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidArgument("density must be positive".into()));
    }
    Ok(density.iter().map(|&r| r * r.ln()).sum::<f64>() * cell_volume)
}

/// `I(ρ) = ½ ∫ |ρ'|²/ρ` on a uniform 1-D grid; centered differences inside,
/// one-sided differences at the two ends.
pub fn grid_fisher_information(density: ArrayView1<f64>, spacing: f64) -> Result<f64> {
    let n = density.len();
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two grid points".into()));
    }
    if density.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidArgument("density must be positive".into()));
    }
    let grad = |i: usize| -> f64 {
        if i == 0 {
            (density[1] - density[0]) / spacing
        } else if i == n - 1 {
            (density[n - 1] - density[n - 2]) / spacing
        } else {
            (density[i + 1] - density[i - 1]) / (2.0 * spacing)
        }
    };
    Ok(0.5 * (0..n).map(|i| grad(i).powi(2) / density[i]).sum::<f64>() * spacing)
}

/// [`grid_fisher_information`] on a periodic grid (centered differences everywhere).
pub fn grid_fisher_information_periodic(density: ArrayView1<f64>, spacing: f64) -> Result<f64> {
    let n = density.len();
    if n < 3 {
        return Err(Error::InvalidArgument("need at least three grid points".into()));
    }
    if density.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidArgument("density must be positive".into()));
    }
    Ok(0.5
        * (0..n)
            .map(|i| {
                let d = (density[(i + 1) % n] - density[(i + n - 1) % n]) / (2.0 * spacing);
                d * d / density[i]
            })
            .sum::<f64>()
        * spacing)
}

/// `D·Δρ` with the three-point periodic Laplacian.
pub fn periodic_heat_rhs(density: ArrayView1<f64>, spacing: f64, diffusivity: f64) -> Array1<f64> {
    let n = density.len();
    let c = diffusivity / (spacing * spacing);
    Array1::from_shape_fn(n, |i| {
        c * (density[(i + 1) % n] - 2.0 * density[i] + density[(i + n - 1) % n])
    })
}

/// Advances `∂ₜρ = D·Δρ` on a periodic grid by `steps` RK4 steps of size `dt`.
pub fn periodic_heat_flow(
    density: ArrayView1<f64>,
    spacing: f64,
    diffusivity: f64,
    dt: f64,
    steps: usize,
) -> Result<Array1<f64>> {
    if !(spacing > 0.0 && diffusivity >= 0.0) {
        return Err(Error::InvalidArgument("spacing must be positive, diffusivity nonnegative".into()));
    }
    // RK4 on the three-point Laplacian is stable for D·dt/dx² ≲ 0.69.
    if diffusivity * dt.abs() / (spacing * spacing) > 0.69 {
        return Err(Error::InvalidArgument("time step too large for explicit heat flow".into()));
    }
    let mut rho = density.to_owned();
    for _ in 0..steps {
        let k1 = periodic_heat_rhs(rho.view(), spacing, diffusivity);
        let k2 = periodic_heat_rhs((&rho + &(&k1 * (0.5 * dt))).view(), spacing, diffusivity);
        let k3 = periodic_heat_rhs((&rho + &(&k2 * (0.5 * dt))).view(), spacing, diffusivity);
        let k4 = periodic_heat_rhs((&rho + &(&k3 * dt)).view(), spacing, diffusivity);
        rho = &rho + &((&k1 + &(&k2 * 2.0) + &(&k3 * 2.0) + &k4) * (dt / 6.0));
    }
    Ok(rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn coupling_mass_scalar() {
        let k = KernelOperator::from_entries(array![[1.0]]).unwrap();
        let s = Scalings {
            a: array![2.0],
            b: array![2.0],
        };
        assert_eq!(coupling_mass(&s, &k).unwrap(), 4.0);
        let m = array![1.0];
        let d = coupling_mass_derivative(&s, &k, &m, &m).unwrap();
        assert!((d + 8.0 * 4f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn relative_entropy_examples() {
        let r = array![0.3, 0.7];
        assert_eq!(relative_entropy(r.view(), r.view()).unwrap(), 0.0);
        let v = relative_entropy(array![1.0, 0.0].view(), array![0.5, 0.5].view()).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-15);
        let g = generalized_relative_entropy(array![1.0, 0.0].view(), array![0.5, 0.5].view()).unwrap();
        assert!((g - 2f64.ln()).abs() < 1e-15);
        // Unequal masses: plain form can go negative, generalized cannot.
        let plain = relative_entropy(array![0.5].view(), array![1.0].view()).unwrap();
        let gen = generalized_relative_entropy(array![0.5].view(), array![1.0].view()).unwrap();
        assert!(plain < 0.0 && gen > 0.0);
        assert!(relative_entropy(array![1.0].view(), array![0.0].view()).is_err());
    }

    #[test]
    fn fisher_rao_examples() {
        let s = array![0.2, 0.5, 1.5];
        assert_eq!(fisher_rao_norm(Array1::zeros(3).view(), s.view()).unwrap(), 0.0);
        assert!((fisher_rao_norm(s.view(), s.view()).unwrap() - s.sum()).abs() < 1e-15);
    }

    #[test]
    fn t_eps_of_constant_is_exactly_t_eps_of_zero() {
        let k = KernelOperator::from_entries(array![[1.0, 0.2, 0.1], [0.2, 1.0, 0.4], [0.1, 0.4, 1.0]]).unwrap();
        let t0 = t_eps_operator(&k, Array1::zeros(3).view()).unwrap();
        let tc = t_eps_operator(&k, Array1::from_elem(3, 3.7).view()).unwrap();
        assert_eq!(t0, tc);
        for v in t0.iter() {
            assert!(v.abs() < 1e-15);
        }
        let id = KernelOperator::from_log_entries(array![[0.0, -800.0], [-800.0, 0.0]]).unwrap();
        let t = t_eps_operator(&id, array![1.0, -2.0].view()).unwrap();
        assert!(t.iter().all(|v| v.abs() < 1e-15));
        assert!(t_eps_operator(&KernelOperator::from_entries(array![[1.0, 2.0]]).unwrap(), array![0.0, 0.0].view()).is_err());
    }

    #[test]
    fn grid_functionals_on_constants() {
        let n = 100;
        let uniform = Array1::from_elem(n, 1.0);
        assert_eq!(grid_entropy(uniform.view(), 1.0 / n as f64).unwrap(), 0.0);
        assert_eq!(grid_fisher_information(uniform.view(), 1.0 / n as f64).unwrap(), 0.0);
        // ρ ≡ 2 on half of the unit interval
        let half = Array1::from_elem(n / 2, 2.0);
        let e = grid_entropy(half.view(), 1.0 / n as f64).unwrap();
        assert!((e - 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn heat_flow_conserves_mass() {
        let n = 64;
        let dx = 1.0 / n as f64;
        let rho = Array1::from_shape_fn(n, |i| 1.0 + 0.3 * (2.0 * std::f64::consts::PI * i as f64 * dx).cos());
        let out = periodic_heat_flow(rho.view(), dx, 1.0, 1e-5, 100).unwrap();
        assert!((out.sum() - rho.sum()).abs() < 1e-12);
        assert!(periodic_heat_flow(rho.view(), dx, 1.0, 1.0, 1).is_err());
    }

    #[test]
    fn unit_diffusivity_dissipates_entropy_at_twice_fisher() {
        // I carries a factor ½, so ∂ₜρ = Δρ gives dE/dt = −2I
        let n = 400;
        let dx = 1.0 / n as f64;
        let rho = Array1::from_shape_fn(n, |i| 1.0 + 0.5 * (2.0 * std::f64::consts::PI * (i as f64 + 0.5) * dx).sin());
        let dt = 1e-7;
        let next = periodic_heat_flow(rho.view(), dx, 1.0, dt, 1).unwrap();
        let prev = periodic_heat_flow(rho.view(), dx, 1.0, -dt, 1).unwrap();
        let de = (grid_entropy(next.view(), dx).unwrap() - grid_entropy(prev.view(), dx).unwrap()) / (2.0 * dt);
        let i = grid_fisher_information_periodic(rho.view(), dx).unwrap();
        assert!((de + 2.0 * i).abs() < 1e-3 * i);
    }
}
