//! Randomized algebraic invariants of the core types.

use proptest::prelude::*;

use waysim::linalg::{
    c, hermitian_eig, max_abs, partial_trace, tensor, unitary_from_generator, variance, CMatrix,
};
use waysim::random::{haar_state, random_hermitian, random_matrix, rng_for};
use waysim::scheme::format::{parse_scheme, write_scheme};
use waysim::scheme::ConservedPair;
use waysim::{BipartiteDims, Factor, Operator, Tolerances};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn tensor_is_associative(seed in any::<u64>(), da in 1usize..4, db in 1usize..4, dc in 1usize..4) {
        let mut rng = rng_for(seed, 0);
        let (a, b, cc) = (random_matrix(da, &mut rng), random_matrix(db, &mut rng), random_matrix(dc, &mut rng));
        let left = tensor(&tensor(&a, &b).unwrap(), &cc).unwrap();
        let right = tensor(&a, &tensor(&b, &cc).unwrap()).unwrap();
        prop_assert!(left.distance(&right) <= 1e-12 * (1.0 + left.max_abs()));
    }

    #[test]
    fn partial_trace_of_product(seed in any::<u64>(), ds in 1usize..5, dp in 1usize..5) {
        let mut rng = rng_for(seed, 1);
        let (a, b) = (random_matrix(ds, &mut rng), random_matrix(dp, &mut rng));
        let ab = tensor(&a, &b).unwrap();
        let dims = BipartiteDims::new(ds, dp).unwrap();
        let sys = partial_trace(&ab, dims, Factor::Probe).unwrap();
        let probe = partial_trace(&ab, dims, Factor::System).unwrap();
        prop_assert!(sys.distance(&a.scale(b.trace())) <= 1e-11);
        prop_assert!(probe.distance(&b.scale(a.trace())) <= 1e-11);
    }

    #[test]
    fn eigendecomposition_reconstructs(seed in any::<u64>(), d in 1usize..8) {
        let a = random_hermitian(d, &mut rng_for(seed, 2));
        let eig = hermitian_eig(&a).unwrap();
        let back = eig.apply_fn(|x| c(x, 0.0));
        prop_assert!(max_abs(&(back - a.matrix())) <= 1e-10 * (1.0 + a.max_abs()));
        prop_assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn generators_commuting_with_l_conserve_it(seed in any::<u64>(), ds in 2usize..4, dp in 2usize..4) {
        let mut rng = rng_for(seed, 3);
        // integer spectra make L degenerate, so the blocks are nontrivial
        let l1: Vec<f64> = (0..ds).map(|k| (k % 2) as f64).collect();
        let l2: Vec<f64> = (0..dp).map(|k| (k % 2) as f64).collect();
        let pair = ConservedPair::new(Operator::diag(&l1), Operator::diag(&l2)).unwrap();
        let l = pair.joint().unwrap();
        let x = random_hermitian(ds * dp, &mut rng);
        let diag: Vec<f64> = (0..ds * dp).map(|i| l.matrix()[(i, i)].re).collect();
        let h = CMatrix::from_fn(ds * dp, ds * dp, |i, j| {
            if diag[i] == diag[j] { x.matrix()[(i, j)] } else { c(0.0, 0.0) }
        });
        let u = unitary_from_generator(&Operator::from_matrix(h).unwrap(), 1.3, 1.0).unwrap();
        let dims = BipartiteDims::new(ds, dp).unwrap();
        let s = waysim::scheme::MeasurementScheme::with_value_labels(
            dims, u, haar_state(dp, &mut rng), random_hermitian(dp, &mut rng), &Tolerances::default(),
            |v| format!("{v:.8}"),
        ).unwrap();
        prop_assert!(s.conservation_residual(&pair).unwrap() <= 1e-9);
    }

    #[test]
    fn induced_povm_is_valid_and_reproduces_pointer_statistics(seed in any::<u64>(), ds in 1usize..4, dp in 2usize..4) {
        let tol = Tolerances::default();
        let mut rng = rng_for(seed, 4);
        let s = waysim::presets::random_scheme(ds, dp, &mut rng, &tol).unwrap();
        let povm = s.induced_povm().unwrap();
        prop_assert!(povm.completeness_residual() <= 1e-10);
        prop_assert!(povm.min_eigenvalue().unwrap() >= -1e-10);
        let psi = haar_state(ds, &mut rng);
        let a = povm.probabilities(&psi).unwrap();
        let b = s.pointer_probabilities(&psi).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn scheme_files_round_trip(seed in any::<u64>()) {
        let tol = Tolerances::default();
        let mut rng = rng_for(seed, 5);
        let s = waysim::presets::random_scheme(2, 2, &mut rng, &tol).unwrap();
        let pair = ConservedPair::new(random_hermitian(2, &mut rng), random_hermitian(2, &mut rng)).unwrap();
        let m = random_hermitian(2, &mut rng);
        let text = write_scheme(&s, Some(&pair), Some(&m));
        let back = parse_scheme(&text, &tol).unwrap();
        prop_assert!(back.scheme.coupling().distance(s.coupling()) <= 1e-14);
        let (p0, p1) = (s.induced_povm().unwrap(), back.scheme.induced_povm().unwrap());
        for ((_, e0), (_, e1)) in p0.effects().iter().zip(p1.effects()) {
            prop_assert!(e0.distance(e1) <= 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(config(1000))]

    #[test]
    fn variance_is_nonnegative(seed in any::<u64>(), d in 1usize..7) {
        let mut rng = rng_for(seed, 6);
        let a = random_hermitian(d, &mut rng);
        let psi = haar_state(d, &mut rng);
        prop_assert!(variance(&a, &psi).unwrap() >= 0.0);
    }
}
