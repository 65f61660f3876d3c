#![allow(dead_code)]

use histlogic_core::linalg::{
    mat_exp_propagator, orthonormal_basis, ComplexMatrix, Tolerance, C64,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn tol() -> Tolerance {
    Tolerance::default()
}

pub fn random_vector(rng: &mut impl Rng, d: usize) -> Vec<C64> {
    (0..d)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

pub fn random_unitary(rng: &mut impl Rng, d: usize) -> ComplexMatrix {
    let a = ComplexMatrix::from_fn(d, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let h = (&a + &a.adjoint()).scale(C64::new(0.5, 0.0));
    mat_exp_propagator(&h, rng.random_range(0.1..3.0), tol()).unwrap()
}

pub fn random_basis(rng: &mut impl Rng, d: usize) -> Vec<Vec<C64>> {
    loop {
        let vs: Vec<Vec<C64>> = (0..d).map(|_| random_vector(rng, d)).collect();
        let b = orthonormal_basis(&vs, tol()).unwrap();
        if b.len() == d {
            return b;
        }
    }
}

pub fn basis_projector(basis: &[Vec<C64>], mask: &[bool]) -> ComplexMatrix {
    let mut p = ComplexMatrix::zeros(basis[0].len());
    for (v, &on) in basis.iter().zip(mask) {
        if on {
            p = &p + &ComplexMatrix::outer(v, v).unwrap();
        }
    }
    p
}

pub fn random_mask(rng: &mut impl Rng, d: usize) -> Vec<bool> {
    (0..d).map(|_| rng.random_bool(0.5)).collect()
}

pub fn random_projector_in(rng: &mut impl Rng, basis: &[Vec<C64>]) -> ComplexMatrix {
    let mask = random_mask(rng, basis.len());
    basis_projector(basis, &mask)
}
