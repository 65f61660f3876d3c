mod common;

use common::*;
use histlogic_core::linalg::{
    complete_unitary, mat_exp_propagator, projector_onto_span, rank_of_projector, C64,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn propagator_matches_taylor_series(seed in any::<u64>(), d in 1usize..5, dt in -2.0f64..2.0) {
        let mut r = rng(seed);
        let h = random_hermitian(&mut r, d);
        let u = mat_exp_propagator(&h, dt, tol()).unwrap();
        prop_assert!(u.is_unitary(tol()));
        prop_assert!(u.max_abs_diff(&taylor_exp(&h, dt)) < 1e-9);
    }

    #[test]
    fn propagator_group_law(seed in any::<u64>(), d in 1usize..5, s in 0.0f64..1.5, t in 0.0f64..1.5) {
        let mut r = rng(seed);
        let h = random_hermitian(&mut r, d);
        let us = mat_exp_propagator(&h, s, tol()).unwrap();
        let ut = mat_exp_propagator(&h, t, tol()).unwrap();
        let ust = mat_exp_propagator(&h, s + t, tol()).unwrap();
        prop_assert!((&us * &ut).approx_eq(&ust, tol()));
    }

    #[test]
    fn span_projectors_are_projectors(seed in any::<u64>(), d in 1usize..6, k in 1usize..4) {
        let mut r = rng(seed);
        let vs: Vec<Vec<C64>> = (0..k.min(d)).map(|_| random_vector(&mut r, d)).collect();
        let p = projector_onto_span(&vs, tol()).unwrap();
        prop_assert!(p.is_projector(tol()));
        prop_assert_eq!(rank_of_projector(&p, tol()).unwrap(), vs.len());
        prop_assert!(p.complement().is_projector(tol()));
        prop_assert!((&p * &p.complement()).is_zero(tol()));
    }

    #[test]
    fn completed_unitaries_map_inputs(seed in any::<u64>(), d in 2usize..6, k in 1usize..3) {
        let mut r = rng(seed);
        let ins = random_basis(&mut r, d);
        let outs = random_basis(&mut r, d);
        let k = k.min(d);
        let u = complete_unitary(&ins[..k], &outs[..k], tol()).unwrap();
        prop_assert!(u.is_unitary(tol()));
        for (v, w) in ins[..k].iter().zip(&outs[..k]) {
            let image = u.apply(v);
            let err = image.iter().zip(w).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            prop_assert!(err < 1e-9);
        }
    }

    #[test]
    fn tensor_of_projectors_is_projector(seed in any::<u64>(), d1 in 1usize..4, d2 in 1usize..4) {
        let mut r = rng(seed);
        let b1 = random_basis(&mut r, d1);
        let b2 = random_basis(&mut r, d2);
        let p = random_projector_in(&mut r, &b1);
        let q = random_projector_in(&mut r, &b2);
        let pq = p.tensor(&q).unwrap();
        prop_assert!(pq.is_projector(tol()));
        prop_assert!((pq.trace() - p.trace() * q.trace()).norm() < 1e-9);
    }
}
