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

pub fn random_hermitian(rng: &mut impl Rng, d: usize) -> ComplexMatrix {
    let a = ComplexMatrix::from_fn(d, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    (&a + &a.adjoint()).scale(C64::new(0.5, 0.0))
}

pub fn random_unitary(rng: &mut impl Rng, d: usize) -> ComplexMatrix {
    let h = random_hermitian(rng, d);
    let dt = rng.random_range(0.1..3.0);
    mat_exp_propagator(&h, dt, tol()).unwrap()
}

/// A random orthonormal basis of C^d.
pub fn random_basis(rng: &mut impl Rng, d: usize) -> Vec<Vec<C64>> {
    loop {
        let vs: Vec<Vec<C64>> = (0..d).map(|_| random_vector(rng, d)).collect();
        let b = orthonormal_basis(&vs, tol()).unwrap();
        if b.len() == d {
            return b;
        }
    }
}

/// Projector onto the basis vectors selected by `mask`.
pub fn basis_projector(basis: &[Vec<C64>], mask: &[bool]) -> ComplexMatrix {
    let d = basis[0].len();
    let mut p = ComplexMatrix::zeros(d);
    for (v, &on) in basis.iter().zip(mask) {
        if on {
            p = &p + &ComplexMatrix::outer(v, v).unwrap();
        }
    }
    p
}

/// A random projector diagonal in `basis`.
pub fn random_projector_in(rng: &mut impl Rng, basis: &[Vec<C64>]) -> ComplexMatrix {
    let mask: Vec<bool> = (0..basis.len()).map(|_| rng.random_bool(0.5)).collect();
    basis_projector(basis, &mask)
}

/// exp(−i dt H) by a truncated Taylor series with scaling and squaring.
pub fn taylor_exp(h: &ComplexMatrix, dt: f64) -> ComplexMatrix {
    let d = h.dim();
    let norm = h.max_abs() * d as f64 * dt.abs();
    let squarings = (norm.max(1.0).log2().ceil() as u32) + 4;
    let scale = dt / f64::from(1u32 << squarings);
    let a = h.scale(C64::new(0.0, -scale));
    let mut term = ComplexMatrix::identity(d);
    let mut sum = ComplexMatrix::identity(d);
    for k in 1..30 {
        term = (&term * &a).scale(C64::new(1.0 / k as f64, 0.0));
        sum = &sum + &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}
