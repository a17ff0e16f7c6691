use nalgebra::{DMatrix, DVector};
use ndarray::array;
use proptest::prelude::*;

use sinkflow::kernels::DomainSpec;
use sinkflow::problem::{validate_problem, AtomicMeasure};
use sinkflow::sinkhorn::{solve, splitting_step, Potentials, SolveConfig};
use sinkflow::stability::{scan_stability, spectral_radius, test_equation_eigenvalues, test_equation_flow_map};

/// Spectral radius of the splitting Jacobian at the fixed point of a symmetric
/// two-point problem, with the exact gauge direction factored out.
fn two_point_jacobian_radius(eps: f64, sep: f64, h: f64) -> f64 {
    let pts = array![[0.0], [sep]];
    let mu = AtomicMeasure::new(pts.clone(), array![0.5, 0.5]).unwrap();
    let problem = validate_problem(DomainSpec::euclidean(1).unwrap(), mu.clone(), mu, eps).unwrap();
    let k = problem.kernel().unwrap();
    let (m0, m1) = (problem.mass0(), problem.mass1());
    let fixed = solve(&problem, &SolveConfig { tol: 1e-14, ..SolveConfig::default() }).unwrap().potentials;
    let pack = |p: &Potentials| DVector::from_iterator(4, p.f.iter().chain(p.g.iter()).copied());
    let unpack = |v: &DVector<f64>| Potentials {
        f: array![v[0], v[1]],
        g: array![v[2], v[3]],
    };
    let x0 = pack(&fixed);
    let step = 1e-6;
    let mut jac = DMatrix::zeros(4, 4);
    for c in 0..4 {
        let mut up = x0.clone();
        let mut dn = x0.clone();
        up[c] += step;
        dn[c] -= step;
        let fu = pack(&splitting_step(&unpack(&up), &k, m0, m1, h).unwrap());
        let fd = pack(&splitting_step(&unpack(&dn), &k, m0, m1, h).unwrap());
        jac.set_column(c, &((fu - fd) / (2.0 * step)));
    }
    // orthonormal basis of the complement of (1, 1, -1, -1)/2
    let s = 0.5f64.sqrt();
    let q = DMatrix::from_row_slice(4, 3, &[s, 0.0, 0.5, -s, 0.0, 0.5, 0.0, s, 0.5, 0.0, -s, 0.5]);
    let gauge = DVector::from_row_slice(&[0.5, 0.5, -0.5, -0.5]);
    assert!((&jac * &gauge - &gauge).norm() < 1e-8);
    let reduced = q.transpose() * &jac * &q;
    reduced.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn jacobian_matches_test_equation() {
    let eps = 0.01f64;
    // separation with 2e/(1+e) = ε for e = exp(-sep²/4ε), i.e. effective coupling 1 − ε
    let e = eps / (2.0 - eps);
    let sep = (-4.0 * eps * e.ln()).sqrt();
    for h in [0.3, 0.8, 1.0, 1.4, 1.75, 1.9] {
        let measured = two_point_jacobian_radius(eps, sep, h);
        let predicted = spectral_radius(&test_equation_flow_map(h, eps));
        assert!(
            (measured - predicted).abs() <= 0.10 * predicted,
            "h={h}: Jacobian radius {measured}, test equation {predicted}"
        );
    }
}

#[test]
fn eigenvalue_magnitudes_meet_before_two() {
    let rep = scan_stability(1e-2, 1.0, 2.0, 1000).unwrap();
    for (h, e) in rep.h_values.iter().zip(&rep.eigenvalues) {
        if *h >= 1.76 && *h < 2.0 {
            assert!((e[0].magnitude - e[1].magnitude).abs() < 1e-12, "h={h}");
        }
        if *h <= 1.74 {
            assert!(e[0].magnitude > e[1].magnitude, "h={h}");
        }
    }
}

#[test]
fn decoupled_case_optimum() {
    let rep = scan_stability(1.0, 0.0, 2.0, 200).unwrap();
    assert!((rep.h_optimal - 1.0).abs() < 1e-4);
    assert!(rep.radius_optimal < 1e-4);
    for (h, r) in rep.h_values.iter().zip(&rep.radii) {
        assert!((r - (1.0 - h).abs()).abs() < 1e-14);
    }
}

proptest! {
    #[test]
    fn stable_inside_zero_two(delta in 1e-3f64..=1.0, h in 0.01f64..1.99) {
        prop_assert!(test_equation_eigenvalues(h, delta)[0].magnitude < 1.0);
    }

    #[test]
    fn unstable_beyond_two(delta in 0.0f64..=1.0, h in 2.0f64..4.0) {
        prop_assert!(test_equation_eigenvalues(h, delta)[0].magnitude >= 1.0);
    }

    #[test]
    fn radius_is_continuous(delta in 1e-3f64..=1.0, h in 0.0f64..2.5) {
        let r = |x: f64| test_equation_eigenvalues(x, delta)[0].magnitude;
        // square-root branch points limit the modulus of continuity
        prop_assert!((r(h + 1e-10) - r(h)).abs() < 1e-4);
    }

    #[test]
    fn exact_determinant_agrees_with_matrix(delta in 0.0f64..=1.0, h in 0.0f64..3.0) {
        let direct = spectral_radius(&test_equation_flow_map(h, delta));
        let exact = test_equation_eigenvalues(h, delta)[0].magnitude;
        prop_assert!((direct - exact).abs() < 1e-7);
    }
}
