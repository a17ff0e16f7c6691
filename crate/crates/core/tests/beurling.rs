use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sinkflow::beurling::{
    generalized_marginals, invert_t_epsilon, log_kernel_integrability, outer_relative_error, t_epsilon_map,
    GeneralMeasure, ProductMeasure,
};
use sinkflow::kernels::DomainSpec;
use sinkflow::problem::random_instance;

fn torus() -> DomainSpec {
    DomainSpec::flat_torus(vec![1.0, 1.0], 5).unwrap()
}

#[test]
fn inversion_depends_continuously_on_marginals() {
    let p = random_instance(40, 8, &torus(), 0.05).unwrap();
    let k = p.kernel().unwrap();
    let base = invert_t_epsilon(p.mass0(), p.mass1(), &k, 1e-13).unwrap();
    let bump = Array1::from_shape_fn(8, |i| if i % 2 == 0 { 1.0 } else { -1.0 });
    let mut ratios = Vec::new();
    for size in [1e-2, 1e-3, 1e-4] {
        let m0 = p.mass0() + &(&bump * size * 0.01);
        let moved = invert_t_epsilon(&m0, p.mass1(), &k, 1e-13).unwrap();
        ratios.push(outer_relative_error(&moved, &base) / size);
    }
    // Lipschitz-like response: the difference quotient settles
    assert!(ratios.iter().all(|r| r.is_finite() && *r < 10.0));
    assert!((ratios[1] - ratios[2]).abs() < 0.05 * ratios[2]);
}

#[test]
fn log_kernel_quantity_is_finite_for_atoms() {
    let p = random_instance(41, 10, &torus(), 0.05).unwrap();
    let k = p.kernel().unwrap();
    let v = log_kernel_integrability(p.mass0(), p.mass1(), &k).unwrap();
    assert!(v.is_finite());
    let bound = k.log_entries().iter().fold(f64::NEG_INFINITY, |m, x| m.max(*x));
    assert!(v <= bound * p.mass0().sum() * p.mass1().sum() + 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn map_is_product_of_generalized_marginals(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_instance(seed % 1000, 5, &torus(), 0.05).unwrap();
        let k = p.kernel().unwrap();
        let pm = ProductMeasure::new(
            Array1::from_shape_fn(5, |_| rng.gen_range(0.1..2.0)),
            Array1::from_shape_fn(5, |_| rng.gen_range(0.1..2.0)),
        ).unwrap();
        let (n0, n1) = generalized_marginals(&GeneralMeasure::from(&pm), &k).unwrap();
        let direct = ProductMeasure::new(n0, n1).unwrap();
        prop_assert!(outer_relative_error(&t_epsilon_map(&pm, &k).unwrap(), &direct) < 1e-14);
    }

    #[test]
    fn canonical_form_is_gauge_free(c in 0.01f64..100.0) {
        let pm = ProductMeasure::new(ndarray::array![0.2, 0.9], ndarray::array![1.5, 0.1, 0.4]).unwrap();
        let scaled = ProductMeasure::new(&pm.alpha * c, &pm.beta / c).unwrap();
        prop_assert!((&scaled.alpha - &pm.alpha).iter().all(|d| d.abs() < 1e-13));
        let o: Array2<f64> = scaled.outer();
        prop_assert!((&o - &pm.outer()).iter().all(|d| d.abs() < 1e-13));
    }
}
