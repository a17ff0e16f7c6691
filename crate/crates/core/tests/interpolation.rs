use ndarray::array;

use sinkflow::diagnostics::coupling_mass;
use sinkflow::interpolation::{bridge_density, default_grid, evolve_scaling, EvalGrid};
use sinkflow::kernels::DomainSpec;
use sinkflow::problem::{random_instance, validate_problem, AtomicMeasure, ProblemInstance};
use sinkflow::sinkhorn::{solve, SolveConfig};

fn line_problem() -> ProblemInstance {
    validate_problem(
        DomainSpec::euclidean(1).unwrap(),
        AtomicMeasure::new(array![[0.0], [0.3], [0.45]], array![0.2, 0.5, 0.3]).unwrap(),
        AtomicMeasure::new(array![[0.9], [1.2]], array![0.6, 0.4]).unwrap(),
        0.04,
    )
    .unwrap()
}

fn tight() -> SolveConfig {
    SolveConfig {
        tol: 1e-13,
        ..SolveConfig::default()
    }
}

#[test]
fn mean_moves_linearly_between_marginals() {
    // Gaussian products make the first moment exactly (1−t)·mean(μ₀) + t·mean(μ₁)
    let p = line_problem();
    let sol = solve(&p, &tight()).unwrap();
    let grid = default_grid(&p, 3000).unwrap();
    let times = [0.1, 0.37, 0.5, 0.81];
    let bridge = bridge_density(&sol.scalings, &p, &times, &grid).unwrap();
    let m0 = p.mu0.points.column(0).dot(p.mass0());
    let m1 = p.mu1.points.column(0).dot(p.mass1());
    let xs: Vec<f64> = (0..grid.len()).map(|i| grid.axes[0].center(i)).collect();
    for (idx, t) in times.iter().enumerate() {
        let row = bridge.values.row(idx);
        let mean: f64 = row.iter().zip(&xs).map(|(r, x)| r * x).sum::<f64>() * grid.cell_volume();
        assert!((mean - ((1.0 - t) * m0 + t * m1)).abs() < 1e-10, "t={t}");
    }
}

#[test]
fn reversal_mirrors_time() {
    let p = line_problem();
    let grid = default_grid(&p, 1500).unwrap();
    let fwd = solve(&p, &tight()).unwrap();
    let rev = solve(&p.reversed(), &tight()).unwrap();
    let times = [0.25, 0.5, 0.75];
    let mirrored: Vec<f64> = times.iter().map(|t| 1.0 - t).collect();
    let a = bridge_density(&fwd.scalings, &p, &times, &grid).unwrap();
    let b = bridge_density(&rev.scalings, &p.reversed(), &mirrored, &grid).unwrap();
    let scale = a.values.iter().fold(0.0f64, |m, v| m.max(*v));
    for (x, y) in a.values.iter().zip(b.values.iter()) {
        assert!((x - y).abs() <= 1e-9 * scale);
    }
}

#[test]
fn approaches_first_marginal_near_zero() {
    let p = line_problem();
    let sol = solve(&p, &tight()).unwrap();
    let grid = default_grid(&p, 4000).unwrap();
    let phi = |x: f64| (3.0 * x).sin();
    let target: f64 = p.mu0.points.column(0).iter().zip(p.mass0()).map(|(x, w)| w * phi(*x)).sum();
    let mut prev = f64::INFINITY;
    for t in [0.2, 0.05, 0.01, 0.002] {
        let b = bridge_density(&sol.scalings, &p, &[t], &grid).unwrap();
        let integral: f64 =
            b.values.row(0).iter().enumerate().map(|(i, r)| r * phi(grid.axes[0].center(i))).sum::<f64>()
                * grid.cell_volume();
        let err = (integral - target).abs();
        assert!(err < prev);
        prev = err;
    }
    assert!(prev < 0.01);
}

#[test]
fn torus_bridge_conserves_mass() {
    let torus = DomainSpec::flat_torus(vec![1.0, 1.0], 5).unwrap();
    let p = random_instance(3, 6, &torus, 0.03).unwrap();
    let sol = solve(&p, &tight()).unwrap();
    let c = coupling_mass(&sol.scalings, &p.kernel().unwrap()).unwrap();
    let grid = default_grid(&p, 120).unwrap();
    let b = bridge_density(&sol.scalings, &p, &[0.3, 0.6], &grid).unwrap();
    for i in 0..2 {
        assert!((b.mass(i) - c).abs() < 1e-9);
    }
}

#[test]
fn evolution_is_linear_in_weights() {
    let d = DomainSpec::euclidean(2).unwrap();
    let grid = EvalGrid::new(vec![
        sinkflow::interpolation::GridAxis { lo: -1.0, hi: 1.0, n: 15 },
        sinkflow::interpolation::GridAxis { lo: -1.0, hi: 1.0, n: 9 },
    ])
    .unwrap();
    let src = array![[0.1, 0.2], [-0.3, 0.0]];
    let (u, v) = (array![1.0, 0.5], array![0.2, 3.0]);
    let eu = evolve_scaling(&u, &src, 0.05, &grid, &d).unwrap();
    let ev = evolve_scaling(&v, &src, 0.05, &grid, &d).unwrap();
    let both = evolve_scaling(&(&u * 2.0 + &v), &src, 0.05, &grid, &d).unwrap();
    for i in 0..grid.len() {
        assert!((both[i] - (2.0 * eu[i] + ev[i])).abs() <= 1e-14 * both[i].max(1.0));
    }
}

#[test]
fn endpoint_times_rejected() {
    let p = line_problem();
    let sol = solve(&p, &tight()).unwrap();
    let grid = default_grid(&p, 50).unwrap();
    assert!(bridge_density(&sol.scalings, &p, &[0.0], &grid).is_err());
    assert!(bridge_density(&sol.scalings, &p, &[0.5, 1.0], &grid).is_err());
}
