//! Dense complex linear algebra for operators on finite-dimensional Hilbert
//! spaces.
//!
//! Every predicate takes a [`Tolerance`] and compares entrywise in the max
//! norm. Matrices are immutable values; operations return new matrices.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

/// Largest matrix side produced by tensor products and embeddings.
pub const MAX_DIM: usize = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix dimension must be at least 1")]
    EmptyMatrix,
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("operator is not Hermitian within tolerance (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("operator is not a projector within tolerance")]
    NotProjector,
    #[error("operator is not unitary within tolerance (deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },
    #[error("cannot build a projector from an empty vector list")]
    EmptySpan,
    #[error("vectors are not orthonormal within tolerance")]
    NotOrthonormal,
    #[error("matrix dimension {dim} exceeds the limit of {max}")]
    DimensionTooLarge { dim: usize, max: usize },
    #[error("invalid tolerance {0}")]
    InvalidTolerance(f64),
}

/// Absolute entrywise tolerance used by all approximate comparisons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub eps: f64,
}

impl Tolerance {
    pub const DEFAULT_EPS: f64 = 1e-9;

    pub fn new(eps: f64) -> Result<Self, LinalgError> {
        if eps.is_finite() && eps >= 0.0 {
            Ok(Self { eps })
        } else {
            Err(LinalgError::InvalidTolerance(eps))
        }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            eps: Self::DEFAULT_EPS,
        }
    }
}

/// A square matrix of complex scalars.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    data: DMatrix<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{}) [", self.dim(), self.dim())?;
        for i in 0..self.dim() {
            write!(f, "  ")?;
            for j in 0..self.dim() {
                let z = self.get(i, j);
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    fn wrap(data: DMatrix<C64>) -> Self {
        debug_assert!(data.is_square());
        Self { data }
    }

    pub fn identity(dim: usize) -> Self {
        Self::wrap(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self::wrap(DMatrix::zeros(dim, dim))
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self::wrap(DMatrix::from_fn(dim, dim, f))
    }

    /// Builds a matrix from row-major rows, rejecting ragged, empty, or
    /// non-finite input.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self, LinalgError> {
        let n = rows.len();
        if n == 0 {
            return Err(LinalgError::EmptyMatrix);
        }
        for row in rows {
            if row.len() != n {
                return Err(LinalgError::NotSquare {
                    rows: n,
                    cols: row.len(),
                });
            }
        }
        for (i, row) in rows.iter().enumerate() {
            for (j, z) in row.iter().enumerate() {
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(LinalgError::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(Self::from_fn(n, |i, j| rows[i][j]))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self, LinalgError> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn diagonal(entries: &[C64]) -> Self {
        let n = entries.len();
        Self::from_fn(n, |i, j| {
            if i == j {
                entries[i]
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    /// Diagonal 0/1 projector selecting the indices where `mask` is true.
    pub fn diagonal_mask(mask: &[bool]) -> Self {
        let entries: Vec<C64> = mask
            .iter()
            .map(|&b| C64::new(if b { 1.0 } else { 0.0 }, 0.0))
            .collect();
        Self::diagonal(&entries)
    }

    /// The operator |u⟩⟨v|.
    pub fn outer(u: &[C64], v: &[C64]) -> Result<Self, LinalgError> {
        if u.len() != v.len() {
            return Err(LinalgError::DimensionMismatch {
                left: u.len(),
                right: v.len(),
            });
        }
        if u.is_empty() {
            return Err(LinalgError::EmptyMatrix);
        }
        Ok(Self::from_fn(u.len(), |i, j| u[i] * v[j].conj()))
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[(row, col)]
    }

    pub fn as_matrix(&self) -> &DMatrix<C64> {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::wrap(self.data.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.data.trace()
    }

    pub fn scale(&self, z: C64) -> Self {
        Self::wrap(&self.data * z)
    }

    /// I − self.
    pub fn complement(&self) -> Self {
        Self::identity(self.dim()) - self
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Entrywise max-norm distance. Panics on dimension mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim(), "max_abs_diff: dimension mismatch");
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Self, tol: Tolerance) -> bool {
        self.dim() == other.dim() && self.max_abs_diff(other) <= tol.eps
    }

    pub fn is_zero(&self, tol: Tolerance) -> bool {
        self.max_abs() <= tol.eps
    }

    /// Hilbert–Schmidt inner product Tr[self† other].
    pub fn hs_inner(&self, other: &Self) -> C64 {
        assert_eq!(self.dim(), other.dim(), "hs_inner: dimension mismatch");
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn hermitian_deviation(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: Tolerance) -> bool {
        self.hermitian_deviation() <= tol.eps
    }

    /// True iff ‖M − M²‖ ≤ eps and ‖M − M†‖ ≤ eps.
    pub fn is_projector(&self, tol: Tolerance) -> bool {
        self.is_hermitian(tol) && self.max_abs_diff(&(self * self)) <= tol.eps
    }

    pub fn unitary_deviation(&self) -> f64 {
        (&self.adjoint() * self).max_abs_diff(&Self::identity(self.dim()))
    }

    pub fn is_unitary(&self, tol: Tolerance) -> bool {
        self.unitary_deviation() <= tol.eps
    }

    pub fn commutator(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check_same_dim(other)?;
        Ok(&(self * other) - &(other * self))
    }

    /// True iff ‖AB − BA‖ ≤ eps.
    pub fn commutes(&self, other: &Self, tol: Tolerance) -> Result<bool, LinalgError> {
        Ok(self.commutator(other)?.max_abs() <= tol.eps)
    }

    /// Kronecker product `self ⊗ other`, first factor most significant.
    pub fn tensor(&self, other: &Self) -> Result<Self, LinalgError> {
        let dim = self.dim() * other.dim();
        if dim > MAX_DIM {
            return Err(LinalgError::DimensionTooLarge { dim, max: MAX_DIM });
        }
        Ok(Self::wrap(self.data.kronecker(&other.data)))
    }

    pub fn tensor_all(factors: &[Self]) -> Result<Self, LinalgError> {
        let (first, rest) = factors.split_first().ok_or(LinalgError::EmptyMatrix)?;
        rest.iter().try_fold(first.clone(), |acc, m| acc.tensor(m))
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim(), "apply: dimension mismatch");
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    fn check_same_dim(&self, other: &Self) -> Result<(), LinalgError> {
        if self.dim() == other.dim() {
            Ok(())
        } else {
            Err(LinalgError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            })
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::wrap(&self.data * &rhs.data)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::wrap(&self.data + &rhs.data)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::wrap(&self.data - &rhs.data)
    }
}

impl Sub<&ComplexMatrix> for ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::wrap(self.data - &rhs.data)
    }
}

/// exp(−i·dt·H) for Hermitian `h` (ħ = 1), via Hermitian eigendecomposition.
pub fn mat_exp_propagator(
    h: &ComplexMatrix,
    dt: f64,
    tol: Tolerance,
) -> Result<ComplexMatrix, LinalgError> {
    let deviation = h.hermitian_deviation();
    if deviation > tol.eps {
        return Err(LinalgError::NotHermitian { deviation });
    }
    let symmetric = (&h.data + h.data.adjoint()) * C64::new(0.5, 0.0);
    let eigen = nalgebra::linalg::SymmetricEigen::new(symmetric);
    let phases = DMatrix::from_diagonal(&eigen.eigenvalues.map(|e| C64::new(0.0, -dt * e).exp()));
    let v = &eigen.eigenvectors;
    Ok(ComplexMatrix::wrap(v * phases * v.adjoint()))
}

fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn vec_inner(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

/// Orthonormalizes `candidate` against `basis`; returns `None` when the
/// residual norm is below `eps`. Two projection passes.
fn gram_schmidt_step(basis: &[Vec<C64>], candidate: &[C64], eps: f64) -> Option<Vec<C64>> {
    let mut r = candidate.to_vec();
    for _ in 0..2 {
        for b in basis {
            let c = vec_inner(b, &r);
            for (x, y) in r.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
    }
    let norm = vec_norm(&r);
    if norm < eps {
        return None;
    }
    Some(r.into_iter().map(|z| z / norm).collect())
}

/// Orthonormal basis for the span of `vectors`, rejecting residuals below
/// `tol.eps`.
pub fn orthonormal_basis(
    vectors: &[Vec<C64>],
    tol: Tolerance,
) -> Result<Vec<Vec<C64>>, LinalgError> {
    let dim = vectors.first().ok_or(LinalgError::EmptySpan)?.len();
    let mut basis: Vec<Vec<C64>> = Vec::new();
    for v in vectors {
        if v.len() != dim {
            return Err(LinalgError::DimensionMismatch {
                left: dim,
                right: v.len(),
            });
        }
        if let Some(b) = gram_schmidt_step(&basis, v, tol.eps.max(f64::MIN_POSITIVE)) {
            basis.push(b);
        }
    }
    Ok(basis)
}

/// Orthogonal projector onto the span of `vectors`.
pub fn projector_onto_span(
    vectors: &[Vec<C64>],
    tol: Tolerance,
) -> Result<ComplexMatrix, LinalgError> {
    let dim = vectors.first().ok_or(LinalgError::EmptySpan)?.len();
    if dim == 0 {
        return Err(LinalgError::EmptyMatrix);
    }
    let basis = orthonormal_basis(vectors, tol)?;
    let mut p = ComplexMatrix::zeros(dim);
    for b in &basis {
        p = &p + &ComplexMatrix::outer(b, b)?;
    }
    Ok(p)
}

/// round(Re Tr P) for a projector `p`.
pub fn rank_of_projector(p: &ComplexMatrix, tol: Tolerance) -> Result<usize, LinalgError> {
    if !p.is_projector(tol) {
        return Err(LinalgError::NotProjector);
    }
    Ok(p.trace().re.round().max(0.0) as usize)
}

fn check_orthonormal(vectors: &[Vec<C64>], tol: Tolerance) -> Result<(), LinalgError> {
    for (i, u) in vectors.iter().enumerate() {
        for (j, v) in vectors.iter().enumerate().skip(i) {
            let expected = if i == j { 1.0 } else { 0.0 };
            if (vec_inner(u, v) - expected).norm() > tol.eps {
                return Err(LinalgError::NotOrthonormal);
            }
        }
    }
    Ok(())
}

/// Unitary sending each `inputs[k]` to `outputs[k]`.
///
/// Both lists must be orthonormal. The orthogonal complements are completed
/// by Gram–Schmidt over the standard basis (in index order) and paired in
/// that order, so the result is deterministic.
pub fn complete_unitary(
    inputs: &[Vec<C64>],
    outputs: &[Vec<C64>],
    tol: Tolerance,
) -> Result<ComplexMatrix, LinalgError> {
    if inputs.len() != outputs.len() {
        return Err(LinalgError::DimensionMismatch {
            left: inputs.len(),
            right: outputs.len(),
        });
    }
    let dim = inputs.first().ok_or(LinalgError::EmptySpan)?.len();
    for v in inputs.iter().chain(outputs) {
        if v.len() != dim {
            return Err(LinalgError::DimensionMismatch {
                left: dim,
                right: v.len(),
            });
        }
    }
    check_orthonormal(inputs, tol)?;
    check_orthonormal(outputs, tol)?;

    let complete = |given: &[Vec<C64>]| {
        let mut basis = given.to_vec();
        for k in 0..dim {
            if basis.len() == dim {
                break;
            }
            let mut e = vec![C64::new(0.0, 0.0); dim];
            e[k] = C64::new(1.0, 0.0);
            if let Some(b) = gram_schmidt_step(&basis, &e, 1e-6) {
                basis.push(b);
            }
        }
        basis
    };
    let ins = complete(inputs);
    let outs = complete(outputs);
    let mut u = ComplexMatrix::zeros(dim);
    for (v, w) in ins.iter().zip(&outs) {
        u = &u + &ComplexMatrix::outer(w, v)?;
    }
    Ok(u)
}

/// Kronecker product of state vectors.
pub fn tensor_vectors(u: &[C64], v: &[C64]) -> Vec<C64> {
    u.iter()
        .flat_map(|a| v.iter().map(move |b| a * b))
        .collect()
}

pub fn basis_vector(dim: usize, index: usize) -> Vec<C64> {
    let mut e = vec![C64::new(0.0, 0.0); dim];
    e[index] = C64::new(1.0, 0.0);
    e
}

/// Lifts `op`, acting on the tensor factors listed in `acting_on` (strictly
/// increasing indices into `factor_dims`, first factor most significant), to
/// the full product space by inserting identities on the other factors.
pub fn embed_operator(
    op: &ComplexMatrix,
    factor_dims: &[usize],
    acting_on: &[usize],
) -> Result<ComplexMatrix, LinalgError> {
    let total: usize = factor_dims.iter().product();
    if total > MAX_DIM {
        return Err(LinalgError::DimensionTooLarge {
            dim: total,
            max: MAX_DIM,
        });
    }
    let local: usize = acting_on.iter().map(|&f| factor_dims[f]).product();
    if op.dim() != local {
        return Err(LinalgError::DimensionMismatch {
            left: op.dim(),
            right: local,
        });
    }
    let digits = |mut index: usize| -> Vec<usize> {
        let mut d = vec![0; factor_dims.len()];
        for f in (0..factor_dims.len()).rev() {
            d[f] = index % factor_dims[f];
            index /= factor_dims[f];
        }
        d
    };
    let local_index = |d: &[usize]| {
        acting_on
            .iter()
            .fold(0, |acc, &f| acc * factor_dims[f] + d[f])
    };
    let all_digits: Vec<Vec<usize>> = (0..total).map(digits).collect();
    let spectators: Vec<usize> = (0..factor_dims.len())
        .filter(|f| !acting_on.contains(f))
        .collect();
    Ok(ComplexMatrix::from_fn(total, |i, j| {
        let (di, dj) = (&all_digits[i], &all_digits[j]);
        if spectators.iter().any(|&f| di[f] != dj[f]) {
            C64::new(0.0, 0.0)
        } else {
            op.get(local_index(di), local_index(dj))
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sigma_x() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()
    }

    fn sx_plus() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]).unwrap()
    }

    fn sz_plus() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]]).unwrap()
    }

    #[test]
    fn adjoint_examples() {
        let id = ComplexMatrix::identity(2);
        assert_eq!(id.adjoint(), id);
        let m = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        let expected = ComplexMatrix::from_real_rows(&[&[0.0, 0.0], &[1.0, 0.0]]).unwrap();
        assert_eq!(m.adjoint(), expected);
        let m = ComplexMatrix::from_rows(&[
            vec![c(0.0, 0.0), c(0.0, 1.0)],
            vec![c(0.0, 0.0), c(0.0, 0.0)],
        ])
        .unwrap();
        let expected = ComplexMatrix::from_rows(&[
            vec![c(0.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, -1.0), c(0.0, 0.0)],
        ])
        .unwrap();
        assert_eq!(m.adjoint(), expected);
    }

    #[test]
    fn projector_predicate() {
        let tol = Tolerance::default();
        assert!(ComplexMatrix::identity(2).is_projector(tol));
        assert!(sx_plus().is_projector(tol));
        assert!(!sigma_x().is_projector(tol));
    }

    #[test]
    fn commutation_examples() {
        let tol = Tolerance::default();
        let p = sx_plus();
        assert!(p.commutes(&ComplexMatrix::identity(2), tol).unwrap());
        assert!(p.commutes(&p, tol).unwrap());
        assert!(!p.commutes(&sz_plus(), tol).unwrap());
        assert!(p.commutes(&ComplexMatrix::identity(3), tol).is_err());
    }

    #[test]
    fn tensor_examples() {
        let id2 = ComplexMatrix::identity(2);
        assert_eq!(id2.tensor(&id2).unwrap(), ComplexMatrix::identity(4));
        let t = sz_plus().tensor(&id2).unwrap();
        assert!((t.trace() - c(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn tensor_guard() {
        let big = ComplexMatrix::identity(100);
        assert!(matches!(
            big.tensor(&big),
            Err(LinalgError::DimensionTooLarge { .. })
        ));
    }

    #[test]
    fn propagator_examples() {
        let tol = Tolerance::default();
        let zero = ComplexMatrix::zeros(3);
        assert!(mat_exp_propagator(&zero, 2.5, tol)
            .unwrap()
            .approx_eq(&ComplexMatrix::identity(3), tol));

        let sz = ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]]).unwrap();
        let u = mat_exp_propagator(&sz, std::f64::consts::PI, tol).unwrap();
        assert!(u.approx_eq(&ComplexMatrix::identity(2).scale(c(-1.0, 0.0)), tol));

        let not_hermitian = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        assert!(matches!(
            mat_exp_propagator(&not_hermitian, 1.0, tol),
            Err(LinalgError::NotHermitian { .. })
        ));
    }

    #[test]
    fn span_examples() {
        let tol = Tolerance::default();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let alpha = vec![c(s, 0.0), c(s, 0.0)];
        let p = projector_onto_span(std::slice::from_ref(&alpha), tol).unwrap();
        assert!(p.approx_eq(&ComplexMatrix::outer(&alpha, &alpha).unwrap(), tol));

        let p2 = projector_onto_span(&[basis_vector(3, 0), basis_vector(3, 2)], tol).unwrap();
        assert!((p2.trace().re - 2.0).abs() < 1e-12);

        let v = vec![c(1.0, 0.0), c(0.0, 2.0), c(-1.0, 1.0)];
        let v2: Vec<C64> = v.iter().map(|z| z * 2.0).collect();
        let single = projector_onto_span(std::slice::from_ref(&v), tol).unwrap();
        let doubled = projector_onto_span(&[v, v2], tol).unwrap();
        assert!(single.approx_eq(&doubled, tol));

        assert_eq!(projector_onto_span(&[], tol), Err(LinalgError::EmptySpan));
    }

    #[test]
    fn rank_examples() {
        let tol = Tolerance::default();
        assert_eq!(
            rank_of_projector(&ComplexMatrix::identity(4), tol).unwrap(),
            4
        );
        assert_eq!(rank_of_projector(&ComplexMatrix::zeros(4), tol).unwrap(), 0);
        assert_eq!(rank_of_projector(&sx_plus(), tol).unwrap(), 1);
        assert_eq!(
            rank_of_projector(&sigma_x(), tol),
            Err(LinalgError::NotProjector)
        );
    }

    #[test]
    fn completion_maps_given_pairs() {
        let tol = Tolerance::default();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let inputs = vec![basis_vector(3, 0)];
        let outputs = vec![vec![c(0.0, 0.0), c(s, 0.0), c(0.0, s)]];
        let u = complete_unitary(&inputs, &outputs, tol).unwrap();
        assert!(u.is_unitary(tol));
        let image = u.apply(&inputs[0]);
        for (a, b) in image.iter().zip(&outputs[0]) {
            assert!((a - b).norm() < 1e-12);
        }
        let bad = vec![vec![c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]];
        assert_eq!(
            complete_unitary(&bad, &outputs, tol),
            Err(LinalgError::NotOrthonormal)
        );
    }

    #[test]
    fn embedding_matches_kronecker() {
        let a = sx_plus();
        let b = ComplexMatrix::from_fn(3, |i, j| c(i as f64, j as f64));
        let id2 = ComplexMatrix::identity(2);
        let id3 = ComplexMatrix::identity(3);
        let dims = [2, 3, 2];
        let lifted = embed_operator(&a, &dims, &[0]).unwrap();
        assert_eq!(
            lifted,
            ComplexMatrix::tensor_all(&[a.clone(), id3.clone(), id2.clone()]).unwrap()
        );
        let lifted = embed_operator(&b, &dims, &[1]).unwrap();
        assert_eq!(
            lifted,
            ComplexMatrix::tensor_all(&[id2.clone(), b.clone(), id2.clone()]).unwrap()
        );
        // Non-adjacent factors: a ⊗ I ⊗ a == embed(a ⊗ a on {0, 2}).
        let aa = a.tensor(&a).unwrap();
        let lifted = embed_operator(&aa, &dims, &[0, 2]).unwrap();
        assert_eq!(
            lifted,
            ComplexMatrix::tensor_all(&[a.clone(), id3, a]).unwrap()
        );
    }
}
