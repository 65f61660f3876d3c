//! Histories on a time grid: propagators, history projectors, the chain
//! operator K, the consistency functional, weights, conditional
//! probabilities and multi-time inference.
//!
//! Propagators are stored as forward steps `U_k` taking `t_k` to `t_{k+1}`.
//! The chain operator uses the backward transforms
//! `T(t_k, t_{k+1}) = U_k†`, so that `K(Ĩ) = T(t_1, t_n)`.
//!
//! A family is a Boolean algebra of commuting projectors on the n-fold
//! tensor space. When every generator is a simple history whose components
//! commute time by time, the algebra is a coarsening of the product of the
//! per-time algebras and is stored as groups of product atoms; nothing of
//! tensor-space size is ever built. Otherwise generators are realized as
//! dense projectors on the tensor space, subject to a size guard.

use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use thiserror::Error;

use crate::framework::{AtomSet, Formula, Framework, FrameworkError, Incompatibility};
use crate::linalg::{mat_exp_propagator, ComplexMatrix, LinalgError, Tolerance, C64};
use crate::logic::{InferenceReason, InferenceVerdict, Witness};

/// Default bound on the tensor-space dimension d^n for dense histories.
pub const DEFAULT_MAX_DENSE_DIM: usize = 4096;
/// Bound on the number of product atoms enumerated for a simple family.
pub const MAX_PRODUCT_ATOMS: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HistoryError {
    #[error("a time grid needs at least one time")]
    EmptyGrid,
    #[error("times must be finite and strictly increasing")]
    GridNotIncreasing,
    #[error("duplicate time label `{0}`")]
    DuplicateTimeLabel(String),
    #[error("unknown time `{0}`")]
    UnknownTime(String),
    #[error("step {index} is not unitary (deviation {deviation:.3e})")]
    NonUnitaryStep { index: usize, deviation: f64 },
    #[error("expected {expected} propagator steps, found {found}")]
    StepCountMismatch { expected: usize, found: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("history has {found} components but the grid has {expected} times")]
    ComponentCount { expected: usize, found: usize },
    #[error("history component at time index {0} is not a projector")]
    NonProjectorComponent(usize),
    #[error("generalized history is not a projector on the tensor space")]
    NonProjectorHistory,
    #[error("target grid does not contain every time of the source grid")]
    GridNotSuperset,
    #[error("generalized histories cannot be lifted to another grid")]
    GeneralizedLift,
    #[error("tensor space dimension {dim} exceeds the limit of {max}")]
    TensorSpaceTooLarge { dim: usize, max: usize },
    #[error("{count} product atoms exceed the limit of {max}")]
    TooManyProductAtoms { count: usize, max: usize },
    #[error("generators `{left}` and `{right}` do not commute")]
    NonCommutingGenerators { left: String, right: String },
    #[error("family is inconsistent (relative off-diagonal {relative_offdiag:.3e})")]
    InconsistentFamily { relative_offdiag: f64 },
    #[error("conditioning statement has weight {weight:.3e}")]
    ZeroWeightCondition { weight: f64 },
    #[error("history is not an element of the family's Boolean algebra")]
    NotInAlgebra,
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Framework(#[from] FrameworkError),
}

/// Strictly increasing times with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
    labels: Vec<String>,
}

impl TimeGrid {
    /// Grid with default labels `t1`, `t2`, ….
    pub fn new(times: Vec<f64>) -> Result<Self, HistoryError> {
        let labels = (1..=times.len()).map(|k| format!("t{k}")).collect();
        Self::build(times, labels)
    }

    pub fn labeled<S: Into<String>>(
        entries: impl IntoIterator<Item = (S, f64)>,
    ) -> Result<Self, HistoryError> {
        let (labels, times): (Vec<String>, Vec<f64>) =
            entries.into_iter().map(|(l, t)| (l.into(), t)).unzip();
        Self::build(times, labels)
    }

    fn build(times: Vec<f64>, labels: Vec<String>) -> Result<Self, HistoryError> {
        if times.is_empty() {
            return Err(HistoryError::EmptyGrid);
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HistoryError::GridNotIncreasing);
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(HistoryError::DuplicateTimeLabel(l.clone()));
            }
        }
        Ok(Self { times, labels })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of_label(&self, label: &str) -> Result<usize, HistoryError> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| HistoryError::UnknownTime(label.to_owned()))
    }

    pub fn index_of_time(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| same_time(s, t))
    }

    pub fn is_subset_of(&self, other: &TimeGrid) -> bool {
        self.times.iter().all(|&t| other.index_of_time(t).is_some())
    }

    /// The grid traversed backwards, with times negated.
    pub fn reversed(&self) -> TimeGrid {
        TimeGrid {
            times: self.times.iter().rev().map(|t| -t).collect(),
            labels: self.labels.iter().rev().cloned().collect(),
        }
    }
}

fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

/// Unitary dynamics on a grid, stored as forward steps.
#[derive(Debug, Clone)]
pub struct PropagatorSet {
    dim: usize,
    grid: TimeGrid,
    steps: Vec<ComplexMatrix>,
}

impl PropagatorSet {
    /// Steps exp(−i (t_{k+1} − t_k) H) for a time-independent Hamiltonian.
    pub fn from_hamiltonian(
        h: &ComplexMatrix,
        grid: TimeGrid,
        tol: Tolerance,
    ) -> Result<Self, HistoryError> {
        let steps = grid
            .times()
            .windows(2)
            .map(|w| mat_exp_propagator(h, w[1] - w[0], tol))
            .collect::<Result<Vec<_>, _>>()?;
        if grid.len() == 1 && !h.is_hermitian(tol) {
            return Err(LinalgError::NotHermitian {
                deviation: h.hermitian_deviation(),
            }
            .into());
        }
        Ok(Self {
            dim: h.dim(),
            grid,
            steps,
        })
    }

    /// Wraps explicit forward steps; `steps[k]` evolves `t_k` to `t_{k+1}`.
    pub fn explicit(
        dim: usize,
        grid: TimeGrid,
        steps: Vec<ComplexMatrix>,
        tol: Tolerance,
    ) -> Result<Self, HistoryError> {
        if steps.len() + 1 != grid.len() {
            return Err(HistoryError::StepCountMismatch {
                expected: grid.len() - 1,
                found: steps.len(),
            });
        }
        for (index, u) in steps.iter().enumerate() {
            if u.dim() != dim {
                return Err(HistoryError::DimensionMismatch {
                    expected: dim,
                    found: u.dim(),
                });
            }
            let deviation = u.unitary_deviation();
            if deviation > tol.eps {
                return Err(HistoryError::NonUnitaryStep { index, deviation });
            }
        }
        Ok(Self { dim, grid, steps })
    }

    /// Identity dynamics on `grid`.
    pub fn trivial(dim: usize, grid: TimeGrid) -> Self {
        let steps = vec![ComplexMatrix::identity(dim); grid.len() - 1];
        Self { dim, grid, steps }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn steps(&self) -> &[ComplexMatrix] {
        &self.steps
    }

    /// T(t_a, t_b): the transformation taking states at `t_b` to `t_a`.
    pub fn transform(&self, a: usize, b: usize) -> ComplexMatrix {
        let mut t = ComplexMatrix::identity(self.dim);
        if a <= b {
            for step in &self.steps[a..b] {
                t = &t * &step.adjoint();
            }
        } else {
            for step in &self.steps[b..a] {
                t = step * &t;
            }
        }
        t
    }

    /// The same dynamics seen on a coarser grid.
    pub fn restrict(&self, sub: &TimeGrid) -> Result<Self, HistoryError> {
        let idx = sub
            .times()
            .iter()
            .map(|&t| {
                self.grid
                    .index_of_time(t)
                    .ok_or(HistoryError::GridNotSuperset)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let steps = idx.windows(2).map(|w| self.transform(w[1], w[0])).collect();
        Ok(Self {
            dim: self.dim,
            grid: sub.clone(),
            steps,
        })
    }

    /// Dynamics on the reversed grid: steps in reverse order, each replaced
    /// by its adjoint.
    pub fn reversed(&self) -> Self {
        Self {
            dim: self.dim,
            grid: self.grid.reversed(),
            steps: self
                .steps
                .iter()
                .rev()
                .map(ComplexMatrix::adjoint)
                .collect(),
        }
    }

    pub fn approx_eq(&self, other: &Self, tol: Tolerance) -> bool {
        self.dim == other.dim
            && self.grid.len() == other.grid.len()
            && self
                .grid
                .times()
                .iter()
                .zip(other.grid.times())
                .all(|(&a, &b)| same_time(a, b))
            && self
                .steps
                .iter()
                .zip(&other.steps)
                .all(|(a, b)| a.approx_eq(b, tol))
    }

    pub fn tensor_dim(&self) -> Option<usize> {
        let n = u32::try_from(self.grid.len()).ok()?;
        self.dim.checked_pow(n)
    }
}

/// Free-function constructor for Hamiltonian dynamics.
pub fn propagators_from_hamiltonian(
    h: &ComplexMatrix,
    grid: TimeGrid,
    tol: Tolerance,
) -> Result<PropagatorSet, HistoryError> {
    PropagatorSet::from_hamiltonian(h, grid, tol)
}

/// Free-function constructor for explicit forward steps.
pub fn propagators_explicit(
    dim: usize,
    grid: TimeGrid,
    steps: Vec<ComplexMatrix>,
    tol: Tolerance,
) -> Result<PropagatorSet, HistoryError> {
    PropagatorSet::explicit(dim, grid, steps, tol)
}

/// A history: a per-time sequence of projectors, or any projector on the
/// tensor space.
#[derive(Debug, Clone)]
pub enum History {
    Simple(Vec<ComplexMatrix>),
    Generalized(ComplexMatrix),
}

impl History {
    /// Simple history with `events` at the given grid indices and I
    /// elsewhere. Several events at one time are multiplied.
    pub fn from_events(
        dim: usize,
        times: usize,
        events: &[(usize, ComplexMatrix)],
    ) -> Result<Self, HistoryError> {
        let mut components = vec![ComplexMatrix::identity(dim); times];
        for (k, p) in events {
            if *k >= times {
                return Err(HistoryError::ComponentCount {
                    expected: times,
                    found: k + 1,
                });
            }
            if p.dim() != dim {
                return Err(HistoryError::DimensionMismatch {
                    expected: dim,
                    found: p.dim(),
                });
            }
            components[*k] = &components[*k] * p;
        }
        Ok(Self::Simple(components))
    }

    pub fn is_simple(&self) -> bool {
        matches!(self, Self::Simple(_))
    }

    /// Checks shape and projector conditions against a model.
    pub fn validate(&self, props: &PropagatorSet, tol: Tolerance) -> Result<(), HistoryError> {
        let n = props.grid().len();
        match self {
            Self::Simple(components) => {
                if components.len() != n {
                    return Err(HistoryError::ComponentCount {
                        expected: n,
                        found: components.len(),
                    });
                }
                for (k, p) in components.iter().enumerate() {
                    if p.dim() != props.dim() {
                        return Err(HistoryError::DimensionMismatch {
                            expected: props.dim(),
                            found: p.dim(),
                        });
                    }
                    if !p.is_projector(tol) {
                        return Err(HistoryError::NonProjectorComponent(k));
                    }
                }
            }
            Self::Generalized(p) => {
                let expected = props.tensor_dim().unwrap_or(usize::MAX);
                if p.dim() != expected {
                    return Err(HistoryError::DimensionMismatch {
                        expected,
                        found: p.dim(),
                    });
                }
                if !p.is_projector(tol) {
                    return Err(HistoryError::NonProjectorHistory);
                }
            }
        }
        Ok(())
    }

    /// P̃ = P₁ ⊗ ⋯ ⊗ P_n, or the stored projector.
    pub fn projector(&self, max_dim: usize) -> Result<ComplexMatrix, HistoryError> {
        match self {
            Self::Simple(components) => {
                let dim = components
                    .iter()
                    .try_fold(1usize, |acc, p| acc.checked_mul(p.dim()))
                    .unwrap_or(usize::MAX);
                if dim > max_dim {
                    return Err(HistoryError::TensorSpaceTooLarge { dim, max: max_dim });
                }
                Ok(ComplexMatrix::tensor_all(components)?)
            }
            Self::Generalized(p) => Ok(p.clone()),
        }
    }

    pub fn approx_eq(
        &self,
        other: &Self,
        tol: Tolerance,
        max_dim: usize,
    ) -> Result<bool, HistoryError> {
        Ok(match (self, other) {
            (Self::Simple(a), Self::Simple(b)) if a.len() == b.len() => {
                a.iter().zip(b).all(|(x, y)| x.approx_eq(y, tol))
                    || self
                        .projector(max_dim)?
                        .approx_eq(&other.projector(max_dim)?, tol)
            }
            _ => self
                .projector(max_dim)?
                .approx_eq(&other.projector(max_dim)?, tol),
        })
    }
}

/// Free-function alias for [`History::projector`] with the default guard.
pub fn history_projector(h: &History) -> Result<ComplexMatrix, HistoryError> {
    h.projector(DEFAULT_MAX_DENSE_DIM)
}

/// Pads a simple history with identities at the times of `to` missing from
/// `from`.
pub fn lift_history(h: &History, from: &TimeGrid, to: &TimeGrid) -> Result<History, HistoryError> {
    let History::Simple(components) = h else {
        return Err(HistoryError::GeneralizedLift);
    };
    if components.len() != from.len() {
        return Err(HistoryError::ComponentCount {
            expected: from.len(),
            found: components.len(),
        });
    }
    if !from.is_subset_of(to) {
        return Err(HistoryError::GridNotSuperset);
    }
    let dim = components.first().map_or(1, ComplexMatrix::dim);
    let lifted = to
        .times()
        .iter()
        .map(|&t| match from.index_of_time(t) {
            Some(k) => components[k].clone(),
            None => ComplexMatrix::identity(dim),
        })
        .collect();
    Ok(History::Simple(lifted))
}

/// K(P̃) = P₁ T(t₁,t₂) P₂ ⋯ T(t_{n−1},t_n) P_n.
pub fn chain_operator_simple(
    components: &[ComplexMatrix],
    props: &PropagatorSet,
) -> Result<ComplexMatrix, HistoryError> {
    let n = props.grid().len();
    if components.len() != n {
        return Err(HistoryError::ComponentCount {
            expected: n,
            found: components.len(),
        });
    }
    let mut k = components[0].clone();
    for (m, p) in components.iter().enumerate().skip(1) {
        if p.dim() != props.dim() {
            return Err(HistoryError::DimensionMismatch {
                expected: props.dim(),
                found: p.dim(),
            });
        }
        k = &(&k * &props.steps()[m - 1].adjoint()) * p;
    }
    Ok(k)
}

/// K(Ã) for an arbitrary operator on the tensor space, by the explicit
/// multi-index sum
/// ⟨i|K|j⟩ = Σ ⟨i k₂…k_n|Ã|l₁…l_{n−1} j⟩ Π_m ⟨l_m|T(t_m,t_{m+1})|k_{m+1}⟩.
pub fn chain_operator_general(
    a: &ComplexMatrix,
    props: &PropagatorSet,
) -> Result<ComplexMatrix, HistoryError> {
    let d = props.dim();
    let n = props.grid().len();
    let big = props.tensor_dim().unwrap_or(usize::MAX);
    if a.dim() != big {
        return Err(HistoryError::DimensionMismatch {
            expected: big,
            found: a.dim(),
        });
    }
    let backward: Vec<ComplexMatrix> = props.steps().iter().map(ComplexMatrix::adjoint).collect();
    let digits: Vec<Vec<usize>> = (0..big)
        .map(|mut x| {
            let mut ds = vec![0; n];
            for slot in ds.iter_mut().rev() {
                *slot = x % d;
                x /= d;
            }
            ds
        })
        .collect();
    let mut k = vec![C64::new(0.0, 0.0); d * d];
    for (row, r) in digits.iter().enumerate() {
        for (col, c) in digits.iter().enumerate() {
            let v = a.get(row, col);
            if v.re == 0.0 && v.im == 0.0 {
                continue;
            }
            let mut term = v;
            for m in 0..n - 1 {
                term *= backward[m].get(c[m], r[m + 1]);
            }
            k[r[0] * d + c[n - 1]] += term;
        }
    }
    Ok(ComplexMatrix::from_fn(d, |i, j| k[i * d + j]))
}

/// K for either kind of history.
pub fn chain_operator(h: &History, props: &PropagatorSet) -> Result<ComplexMatrix, HistoryError> {
    match h {
        History::Simple(components) => chain_operator_simple(components, props),
        History::Generalized(p) => chain_operator_general(p, props),
    }
}

/// C(Ã, B̃) = Tr[K(Ã)† K(B̃)] for operators on the tensor space.
pub fn consistency_functional(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    props: &PropagatorSet,
) -> Result<C64, HistoryError> {
    let ka = chain_operator_general(a, props)?;
    let kb = chain_operator_general(b, props)?;
    Ok(ka.hs_inner(&kb))
}

/// Tolerances and size limits for family construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilySettings {
    pub tol: Tolerance,
    /// Bound on max |C(M^α, M^β)| (α ≠ β) relative to the largest weight.
    pub eps_consistency: f64,
    pub max_dense_dim: usize,
}

impl FamilySettings {
    pub const DEFAULT_EPS_CONSISTENCY: f64 = 1e-8;
}

impl Default for FamilySettings {
    fn default() -> Self {
        Self {
            tol: Tolerance::default(),
            eps_consistency: Self::DEFAULT_EPS_CONSISTENCY,
            max_dense_dim: DEFAULT_MAX_DENSE_DIM,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConsistencyVerdict {
    Consistent,
    Inconsistent,
}

impl fmt::Display for ConsistencyVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Consistent => "Consistent",
            Self::Inconsistent => "Inconsistent",
        })
    }
}

/// Consistency functional evaluated on all pairs of atoms.
#[derive(Debug, Clone)]
pub struct ConsistencyReport {
    /// gram[α][β] = C(M^α, M^β).
    pub gram: Vec<Vec<C64>>,
    /// W(M^α), the real diagonal of `gram`.
    pub weights: Vec<f64>,
    pub max_offdiag: f64,
    pub max_weight: f64,
    /// `max_offdiag / max_weight`.
    pub relative_offdiag: f64,
    pub eps_consistency: f64,
    pub verdict: ConsistencyVerdict,
}

impl ConsistencyReport {
    fn from_chains(chains: &[ComplexMatrix], eps_consistency: f64) -> Self {
        let n = chains.len();
        let mut gram = vec![vec![C64::new(0.0, 0.0); n]; n];
        for a in 0..n {
            for b in a..n {
                let c = chains[a].hs_inner(&chains[b]);
                gram[a][b] = c;
                gram[b][a] = c.conj();
            }
            gram[a][a].im = 0.0;
        }
        let weights: Vec<f64> = (0..n).map(|a| gram[a][a].re).collect();
        let max_weight = weights.iter().copied().fold(0.0, f64::max);
        let mut max_offdiag: f64 = 0.0;
        for (a, row) in gram.iter().enumerate() {
            for (b, c) in row.iter().enumerate() {
                if a != b {
                    max_offdiag = max_offdiag.max(c.norm());
                }
            }
        }
        let relative_offdiag = if max_weight > 0.0 {
            max_offdiag / max_weight
        } else {
            max_offdiag
        };
        let verdict = if relative_offdiag <= eps_consistency {
            ConsistencyVerdict::Consistent
        } else {
            ConsistencyVerdict::Inconsistent
        };
        Self {
            gram,
            weights,
            max_offdiag,
            max_weight,
            relative_offdiag,
            eps_consistency,
            verdict,
        }
    }

    pub fn is_consistent(&self) -> bool {
        self.verdict == ConsistencyVerdict::Consistent
    }
}

#[derive(Debug, Clone)]
enum Representation {
    /// Per-time frameworks; each atom is a list of product-atom tuples.
    Product {
        per_time: Vec<Framework>,
        cells: Vec<Vec<Vec<usize>>>,
    },
    /// Framework on the tensor space itself.
    Dense(Framework),
}

/// Leaf of a statement about histories within a family.
#[derive(Debug, Clone)]
pub enum HistoryLeaf {
    /// A generator of the family, by name.
    Generator(String),
    /// Any history that lies in the family's algebra.
    History(History),
}

impl fmt::Display for HistoryLeaf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Generator(name) => f.write_str(name),
            Self::History(_) => f.write_str("<history>"),
        }
    }
}

impl From<&str> for HistoryLeaf {
    fn from(name: &str) -> Self {
        Self::Generator(name.to_owned())
    }
}

impl From<History> for HistoryLeaf {
    fn from(h: History) -> Self {
        Self::History(h)
    }
}

pub type HistoryFormula = Formula<HistoryLeaf>;

/// A Boolean algebra of history projectors with its consistency report.
#[derive(Debug, Clone)]
pub struct HistoryFamily {
    props: Arc<PropagatorSet>,
    generators: IndexMap<String, History>,
    repr: Representation,
    signatures: Vec<Vec<bool>>,
    chains: Vec<ComplexMatrix>,
    report: ConsistencyReport,
    settings: FamilySettings,
}

/// Whether two validated histories commute as projectors on the tensor
/// space.
///
/// For simple histories, ⊗P_k and ⊗Q_k commute iff some P_kQ_k vanishes or
/// every pair P_k, Q_k commutes.
pub fn histories_commute(
    a: &History,
    b: &History,
    settings: &FamilySettings,
) -> Result<bool, HistoryError> {
    let tol = settings.tol;
    match (a, b) {
        (History::Simple(x), History::Simple(y)) => {
            if x.iter().zip(y).any(|(p, q)| (p * q).is_zero(tol)) {
                return Ok(true);
            }
            for (p, q) in x.iter().zip(y) {
                if !p.commutes(q, tol)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        _ => {
            let pa = a.projector(settings.max_dense_dim)?;
            let pb = b.projector(settings.max_dense_dim)?;
            Ok(pa.commutes(&pb, tol)?)
        }
    }
}

impl HistoryFamily {
    /// Builds the family generated by `generators` and evaluates its
    /// consistency. Inconsistent families are returned with that verdict.
    pub fn build(
        props: Arc<PropagatorSet>,
        generators: IndexMap<String, History>,
        settings: FamilySettings,
    ) -> Result<Self, HistoryError> {
        for h in generators.values() {
            h.validate(&props, settings.tol)?;
        }
        let entries: Vec<(&String, &History)> = generators.iter().collect();
        for (i, (na, a)) in entries.iter().enumerate() {
            for (nb, b) in &entries[i + 1..] {
                if !histories_commute(a, b, &settings)? {
                    return Err(HistoryError::NonCommutingGenerators {
                        left: (*na).clone(),
                        right: (*nb).clone(),
                    });
                }
            }
        }
        let (repr, signatures, chains) =
            match Self::product_algebra(&props, &generators, &settings)? {
                Some(built) => built,
                None => Self::dense_algebra(&props, &generators, &settings)?,
            };
        let report = ConsistencyReport::from_chains(&chains, settings.eps_consistency);
        Ok(Self {
            props,
            generators,
            repr,
            signatures,
            chains,
            report,
            settings,
        })
    }

    #[allow(clippy::type_complexity)]
    fn product_algebra(
        props: &PropagatorSet,
        generators: &IndexMap<String, History>,
        settings: &FamilySettings,
    ) -> Result<Option<(Representation, Vec<Vec<bool>>, Vec<ComplexMatrix>)>, HistoryError> {
        let tol = settings.tol;
        let n = props.grid().len();
        let d = props.dim();
        let mut simple: Vec<&[ComplexMatrix]> = Vec::with_capacity(generators.len());
        for h in generators.values() {
            match h {
                History::Simple(c) => simple.push(c),
                History::Generalized(_) => return Ok(None),
            }
        }
        let identity = ComplexMatrix::identity(d);
        let mut per_time = Vec::with_capacity(n);
        // masks[g][k]: atoms of the time-k framework under generator g's component.
        let mut masks: Vec<Vec<AtomSet>> = vec![Vec::with_capacity(n); simple.len()];
        for k in 0..n {
            let mut distinct: Vec<ComplexMatrix> = Vec::new();
            let mut slot = Vec::with_capacity(simple.len());
            for components in &simple {
                let p = &components[k];
                if p.approx_eq(&identity, tol) {
                    slot.push(None);
                    continue;
                }
                let j = match distinct.iter().position(|q| q.approx_eq(p, tol)) {
                    Some(j) => j,
                    None => {
                        distinct.push(p.clone());
                        distinct.len() - 1
                    }
                };
                slot.push(Some(j));
            }
            let named: IndexMap<String, ComplexMatrix> = distinct
                .into_iter()
                .enumerate()
                .map(|(j, p)| (j.to_string(), p))
                .collect();
            let fw = match Framework::build(d, named, tol) {
                Ok(fw) => fw,
                Err(
                    FrameworkError::NonCommutingGenerators { .. }
                    | FrameworkError::TooManyGenerators { .. },
                ) => return Ok(None),
                Err(e) => return Err(e.into()),
            };
            for (g, s) in slot.into_iter().enumerate() {
                masks[g].push(match s {
                    Some(j) => fw.generator_atoms(&j.to_string())?,
                    None => AtomSet::full(fw.atoms().len()),
                });
            }
            per_time.push(fw);
        }
        let count = per_time
            .iter()
            .try_fold(1usize, |acc, fw| acc.checked_mul(fw.atoms().len()))
            .unwrap_or(usize::MAX);
        if count > MAX_PRODUCT_ATOMS {
            return Err(HistoryError::TooManyProductAtoms {
                count,
                max: MAX_PRODUCT_ATOMS,
            });
        }

        let mut signatures: Vec<Vec<bool>> = Vec::new();
        let mut cells: Vec<Vec<Vec<usize>>> = Vec::new();
        let mut chains: Vec<ComplexMatrix> = Vec::new();
        let mut tuple = vec![0usize; n];
        for _ in 0..count {
            let signature: Vec<bool> = masks
                .iter()
                .map(|gm| gm.iter().zip(&tuple).all(|(m, &a)| m.contains(a)))
                .collect();
            let components: Vec<ComplexMatrix> = tuple
                .iter()
                .enumerate()
                .map(|(k, &a)| per_time[k].atoms()[a].clone())
                .collect();
            let chain = chain_operator_simple(&components, props)?;
            match signatures.iter().position(|s| *s == signature) {
                Some(i) => {
                    cells[i].push(tuple.clone());
                    chains[i] = &chains[i] + &chain;
                }
                None => {
                    signatures.push(signature);
                    cells.push(vec![tuple.clone()]);
                    chains.push(chain);
                }
            }
            // Odometer over per-time atom indices, last time fastest.
            for k in (0..n).rev() {
                tuple[k] += 1;
                if tuple[k] < per_time[k].atoms().len() {
                    break;
                }
                tuple[k] = 0;
            }
        }
        Ok(Some((
            Representation::Product { per_time, cells },
            signatures,
            chains,
        )))
    }

    #[allow(clippy::type_complexity)]
    fn dense_algebra(
        props: &PropagatorSet,
        generators: &IndexMap<String, History>,
        settings: &FamilySettings,
    ) -> Result<(Representation, Vec<Vec<bool>>, Vec<ComplexMatrix>), HistoryError> {
        let big = props.tensor_dim().unwrap_or(usize::MAX);
        if big > settings.max_dense_dim {
            return Err(HistoryError::TensorSpaceTooLarge {
                dim: big,
                max: settings.max_dense_dim,
            });
        }
        let dense: IndexMap<String, ComplexMatrix> = generators
            .iter()
            .map(|(name, h)| Ok((name.clone(), h.projector(settings.max_dense_dim)?)))
            .collect::<Result<_, HistoryError>>()?;
        let fw = Framework::build(big, dense, settings.tol)?;
        let signatures = (0..fw.atoms().len())
            .map(|a| fw.signature(a).to_vec())
            .collect();
        let chains = fw
            .atoms()
            .iter()
            .map(|m| chain_operator_general(m, props))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((Representation::Dense(fw), signatures, chains))
    }

    pub fn propagators(&self) -> &Arc<PropagatorSet> {
        &self.props
    }

    pub fn grid(&self) -> &TimeGrid {
        self.props.grid()
    }

    pub fn dim(&self) -> usize {
        self.props.dim()
    }

    pub fn settings(&self) -> &FamilySettings {
        &self.settings
    }

    pub fn generators(&self) -> &IndexMap<String, History> {
        &self.generators
    }

    pub fn report(&self) -> &ConsistencyReport {
        &self.report
    }

    pub fn is_consistent(&self) -> bool {
        self.report.is_consistent()
    }

    pub fn atom_count(&self) -> usize {
        self.chains.len()
    }

    /// K(M^α) for each atom.
    pub fn atom_chains(&self) -> &[ComplexMatrix] {
        &self.chains
    }

    /// True when atoms are stored as product-atom groups rather than dense
    /// tensor-space projectors.
    pub fn is_product_form(&self) -> bool {
        matches!(self.repr, Representation::Product { .. })
    }

    /// Dense projector of atom `atom` on the tensor space.
    pub fn atom_projector(&self, atom: usize) -> Result<ComplexMatrix, HistoryError> {
        match &self.repr {
            Representation::Dense(fw) => Ok(fw.atoms()[atom].clone()),
            Representation::Product { per_time, cells } => {
                let big = self.props.tensor_dim().unwrap_or(usize::MAX);
                if big > self.settings.max_dense_dim {
                    return Err(HistoryError::TensorSpaceTooLarge {
                        dim: big,
                        max: self.settings.max_dense_dim,
                    });
                }
                let mut sum = ComplexMatrix::zeros(big);
                for tuple in &cells[atom] {
                    let factors: Vec<ComplexMatrix> = tuple
                        .iter()
                        .enumerate()
                        .map(|(k, &a)| per_time[k].atoms()[a].clone())
                        .collect();
                    sum = &sum + &ComplexMatrix::tensor_all(&factors)?;
                }
                Ok(sum)
            }
        }
    }

    pub fn generator_atoms(&self, name: &str) -> Result<AtomSet, HistoryError> {
        let g = self
            .generators
            .get_index_of(name)
            .ok_or_else(|| HistoryError::UnknownGenerator(name.to_owned()))?;
        Ok(AtomSet::from_bits(
            self.signatures.iter().map(|s| s[g]).collect(),
        ))
    }

    /// Writes a history as a set of atoms; fails when it is not in the
    /// algebra.
    pub fn decompose(&self, h: &History) -> Result<AtomSet, HistoryError> {
        h.validate(&self.props, self.settings.tol)?;
        match (&self.repr, h) {
            (Representation::Product { per_time, cells }, History::Simple(components)) => {
                decompose_product(per_time, cells, components, self.settings.tol)
            }
            (Representation::Dense(fw), _) => {
                let p = h.projector(self.settings.max_dense_dim)?;
                fw.decompose(&p).map_err(|e| match e {
                    FrameworkError::NotInAlgebra => HistoryError::NotInAlgebra,
                    other => other.into(),
                })
            }
            (Representation::Product { .. }, History::Generalized(p)) => {
                let atoms = (0..self.atom_count())
                    .map(|a| self.atom_projector(a))
                    .collect::<Result<Vec<_>, _>>()?;
                let tol = self.settings.tol;
                let bits: Vec<bool> = atoms.iter().map(|m| (p * m).approx_eq(m, tol)).collect();
                let set = AtomSet::from_bits(bits);
                let rebuilt = set
                    .indices()
                    .fold(ComplexMatrix::zeros(p.dim()), |acc, a| &acc + &atoms[a]);
                if rebuilt.approx_eq(p, tol) {
                    Ok(set)
                } else {
                    Err(HistoryError::NotInAlgebra)
                }
            }
        }
    }

    /// The atoms of a statement about histories.
    pub fn element(&self, formula: &HistoryFormula) -> Result<AtomSet, HistoryError> {
        formula.fold(
            &mut |leaf: &HistoryLeaf| match leaf {
                HistoryLeaf::Generator(name) => self.generator_atoms(name),
                HistoryLeaf::History(h) => self.decompose(h),
            },
            &|a: AtomSet| !a,
            &|a: AtomSet, b: AtomSet| a & b,
            &|a: AtomSet, b: AtomSet| a | b,
        )
    }

    /// C(A, B) for algebra elements, by bilinearity over atoms.
    pub fn functional(&self, a: &AtomSet, b: &AtomSet) -> C64 {
        let mut total = C64::new(0.0, 0.0);
        for i in a.indices() {
            for j in b.indices() {
                total += self.report.gram[i][j];
            }
        }
        total
    }

    fn require_consistent(&self) -> Result<(), HistoryError> {
        if self.is_consistent() {
            Ok(())
        } else {
            Err(HistoryError::InconsistentFamily {
                relative_offdiag: self.report.relative_offdiag,
            })
        }
    }

    /// W(P̃) = C(P̃, P̃); only defined on consistent families.
    pub fn weight_of(&self, set: &AtomSet) -> Result<f64, HistoryError> {
        self.require_consistent()?;
        Ok(self.functional(set, set).re.max(0.0))
    }

    pub fn weight(&self, formula: &HistoryFormula) -> Result<f64, HistoryError> {
        self.weight_of(&self.element(formula)?)
    }

    /// Pr(q | p) = W(P̃Q̃) / W(P̃).
    pub fn conditional_probability_of(
        &self,
        q: &AtomSet,
        p: &AtomSet,
    ) -> Result<f64, HistoryError> {
        let wp = self.weight_of(p)?;
        if wp <= self.settings.tol.eps {
            return Err(HistoryError::ZeroWeightCondition { weight: wp });
        }
        let wpq = self.weight_of(&(p.clone() & q.clone()))?;
        Ok(wpq / wp)
    }

    pub fn conditional_probability(
        &self,
        q: &HistoryFormula,
        p: &HistoryFormula,
    ) -> Result<f64, HistoryError> {
        self.conditional_probability_of(&self.element(q)?, &self.element(p)?)
    }
}

/// Classification of a per-time atom against a component projector.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Relation {
    Under,
    Orthogonal,
    Mixed,
}

fn decompose_product(
    per_time: &[Framework],
    cells: &[Vec<Vec<usize>>],
    components: &[ComplexMatrix],
    tol: Tolerance,
) -> Result<AtomSet, HistoryError> {
    let relations: Vec<Vec<Relation>> = per_time
        .iter()
        .zip(components)
        .map(|(fw, q)| {
            fw.atoms()
                .iter()
                .map(|a| {
                    let qa = q * a;
                    if qa.approx_eq(a, tol) {
                        Relation::Under
                    } else if qa.is_zero(tol) {
                        Relation::Orthogonal
                    } else {
                        Relation::Mixed
                    }
                })
                .collect()
        })
        .collect();
    let mut bits = Vec::with_capacity(cells.len());
    for cell in cells {
        let mut inside = false;
        let mut outside = false;
        for tuple in cell {
            let rel: Vec<Relation> = tuple
                .iter()
                .enumerate()
                .map(|(k, &a)| relations[k][a])
                .collect();
            if rel.contains(&Relation::Orthogonal) {
                outside = true;
            } else if rel.iter().all(|&r| r == Relation::Under) {
                inside = true;
            } else {
                return Err(HistoryError::NotInAlgebra);
            }
        }
        if inside && outside {
            return Err(HistoryError::NotInAlgebra);
        }
        bits.push(inside);
    }
    Ok(AtomSet::from_bits(bits))
}

/// Free-function entry point for [`HistoryFamily::build`].
pub fn build_family(
    props: Arc<PropagatorSet>,
    generators: IndexMap<String, History>,
    settings: FamilySettings,
) -> Result<HistoryFamily, HistoryError> {
    HistoryFamily::build(props, generators, settings)
}

pub fn weight(formula: &HistoryFormula, family: &HistoryFamily) -> Result<f64, HistoryError> {
    family.weight(formula)
}

pub fn conditional_probability(
    q: &HistoryFormula,
    p: &HistoryFormula,
    family: &HistoryFamily,
) -> Result<f64, HistoryError> {
    family.conditional_probability(q, p)
}

/// Outcome of [`families_compatible`].
#[derive(Debug, Clone)]
pub enum FamilyCompatibility {
    /// The collection is compatible; carries the generated family.
    Compatible(Box<HistoryFamily>),
    Incompatible(Incompatibility),
}

impl FamilyCompatibility {
    pub fn is_compatible(&self) -> bool {
        matches!(self, Self::Compatible(_))
    }
}

/// Lifts the families to a common grid, checks notational consistency and
/// commutation across families, and requires the generated family to be
/// consistent.
pub fn families_compatible(
    families: &[&HistoryFamily],
    settings: FamilySettings,
) -> Result<FamilyCompatibility, HistoryError> {
    let Some(first) = families.first() else {
        return Err(HistoryError::EmptyGrid);
    };
    if families.len() == 1 {
        return Ok(if first.is_consistent() {
            FamilyCompatibility::Compatible(Box::new((*first).clone()))
        } else {
            FamilyCompatibility::Incompatible(Incompatibility::Inconsistent {
                relative_offdiag: first.report().relative_offdiag,
            })
        });
    }
    let tol = settings.tol;

    // The union grid must be the grid of one of the families, whose
    // dynamics restrict to every other family's dynamics.
    let mut union: Vec<f64> = Vec::new();
    for fam in families {
        for &t in fam.grid().times() {
            if !union.iter().any(|&s| same_time(s, t)) {
                union.push(t);
            }
        }
    }
    let Some(base) = families.iter().find(|f| f.grid().len() == union.len()) else {
        return Ok(FamilyCompatibility::Incompatible(
            Incompatibility::GridConflict {
                reason: "no family is defined on the union of the time grids".into(),
            },
        ));
    };
    let base_props = base.propagators().clone();
    for fam in families {
        if fam.dim() != base.dim() {
            return Ok(FamilyCompatibility::Incompatible(
                Incompatibility::GridConflict {
                    reason: format!(
                        "Hilbert space dimensions {} and {} differ",
                        fam.dim(),
                        base.dim()
                    ),
                },
            ));
        }
        if !base_props
            .restrict(fam.grid())?
            .approx_eq(fam.propagators(), tol)
        {
            return Ok(FamilyCompatibility::Incompatible(
                Incompatibility::GridConflict {
                    reason: "families use different dynamics".into(),
                },
            ));
        }
    }

    let mut merged: IndexMap<String, History> = IndexMap::new();
    let mut owner: IndexMap<String, usize> = IndexMap::new();
    for (f, fam) in families.iter().enumerate() {
        for (name, h) in fam.generators() {
            let lifted = if fam.grid().len() == base.grid().len() {
                h.clone()
            } else {
                match lift_history(h, fam.grid(), base.grid()) {
                    Ok(l) => l,
                    Err(HistoryError::GeneralizedLift) => {
                        return Ok(FamilyCompatibility::Incompatible(
                            Incompatibility::GridConflict {
                                reason: format!("generalized history `{name}` cannot be lifted"),
                            },
                        ))
                    }
                    Err(e) => return Err(e),
                }
            };
            match merged.get(name) {
                Some(existing) => {
                    if !existing.approx_eq(&lifted, tol, settings.max_dense_dim)? {
                        return Ok(FamilyCompatibility::Incompatible(
                            Incompatibility::NotationalConflict { name: name.clone() },
                        ));
                    }
                }
                None => {
                    merged.insert(name.clone(), lifted);
                    owner.insert(name.clone(), f);
                }
            }
        }
    }

    let entries: Vec<(&String, &History)> = merged.iter().collect();
    for (i, (na, a)) in entries.iter().enumerate() {
        for (nb, b) in &entries[i + 1..] {
            if owner[*na] == owner[*nb] {
                continue;
            }
            if !histories_commute(a, b, &settings)? {
                return Ok(FamilyCompatibility::Incompatible(
                    Incompatibility::NonCommuting {
                        left: (*na).clone(),
                        right: (*nb).clone(),
                    },
                ));
            }
        }
    }

    let generated = HistoryFamily::build(base_props, merged, settings)?;
    if generated.is_consistent() {
        Ok(FamilyCompatibility::Compatible(Box::new(generated)))
    } else {
        Ok(FamilyCompatibility::Incompatible(
            Incompatibility::Inconsistent {
                relative_offdiag: generated.report().relative_offdiag,
            },
        ))
    }
}

/// Checks a multi-time argument: the union of all families must be
/// compatible, the assumptions' joint weight W(Ã) positive, and
/// Pr(c_j | Ã) = 1 for every conclusion.
pub fn infer_histories(
    assumptions: &[(&HistoryFamily, HistoryFormula)],
    conclusions: &[(&HistoryFamily, HistoryFormula)],
    settings: FamilySettings,
) -> InferenceVerdict {
    match try_infer_histories(assumptions, conclusions, settings) {
        Ok(v) => v,
        Err(e) => InferenceVerdict {
            reason: InferenceReason::NotEntailed,
            assumption_projector: None,
            assumption_weight: None,
            witness: Some(Witness::Error(e.to_string())),
        },
    }
}

fn try_infer_histories(
    assumptions: &[(&HistoryFamily, HistoryFormula)],
    conclusions: &[(&HistoryFamily, HistoryFormula)],
    settings: FamilySettings,
) -> Result<InferenceVerdict, HistoryError> {
    let families: Vec<&HistoryFamily> = assumptions
        .iter()
        .chain(conclusions)
        .map(|(f, _)| *f)
        .collect();
    if families.is_empty() {
        return Ok(InferenceVerdict {
            reason: InferenceReason::Proven,
            assumption_projector: None,
            assumption_weight: None,
            witness: None,
        });
    }
    let generated = match families_compatible(&families, settings)? {
        FamilyCompatibility::Compatible(g) => g,
        FamilyCompatibility::Incompatible(why) => {
            return Ok(InferenceVerdict {
                reason: InferenceReason::IncompatibleFrameworks,
                assumption_projector: None,
                assumption_weight: None,
                witness: Some(Witness::Incompatible(why)),
            })
        }
    };
    let mut a = AtomSet::full(generated.atom_count());
    for (_, f) in assumptions {
        a = a & generated.element(f)?;
    }
    let wa = generated.weight_of(&a)?;
    if wa <= settings.tol.eps {
        return Ok(InferenceVerdict {
            reason: InferenceReason::ContradictoryAssumptions,
            assumption_projector: None,
            assumption_weight: Some(wa),
            witness: Some(Witness::AssumptionWeight(wa)),
        });
    }
    for (index, (_, c)) in conclusions.iter().enumerate() {
        let probability = generated.conditional_probability_of(&generated.element(c)?, &a)?;
        if (probability - 1.0).abs() > settings.tol.eps {
            return Ok(InferenceVerdict {
                reason: InferenceReason::NotEntailed,
                assumption_projector: None,
                assumption_weight: Some(wa),
                witness: Some(Witness::Conclusion { index, probability }),
            });
        }
    }
    Ok(InferenceVerdict {
        reason: InferenceReason::Proven,
        assumption_projector: None,
        assumption_weight: Some(wa),
        witness: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{basis_vector, projector_onto_span};

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn ket_proj(v: &[C64]) -> ComplexMatrix {
        projector_onto_span(&[v.to_vec()], tol()).unwrap()
    }

    fn z_up() -> ComplexMatrix {
        ket_proj(&basis_vector(2, 0))
    }

    fn x_up() -> ComplexMatrix {
        let s = 0.5f64.sqrt();
        ket_proj(&[c(s, 0.0), c(s, 0.0)])
    }

    fn y_up() -> ComplexMatrix {
        let s = 0.5f64.sqrt();
        ket_proj(&[c(s, 0.0), c(0.0, s)])
    }

    fn rotation(theta: f64) -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[theta.cos(), -theta.sin()], &[theta.sin(), theta.cos()]])
            .unwrap()
    }

    fn named(items: Vec<(&str, History)>) -> IndexMap<String, History> {
        items.into_iter().map(|(n, h)| (n.to_owned(), h)).collect()
    }

    fn leaf(name: &str) -> HistoryFormula {
        Formula::leaf(name)
    }

    #[test]
    fn grid_validation() {
        assert_eq!(TimeGrid::new(vec![]), Err(HistoryError::EmptyGrid));
        assert_eq!(
            TimeGrid::new(vec![0.0, 0.0]),
            Err(HistoryError::GridNotIncreasing)
        );
        assert_eq!(
            TimeGrid::new(vec![1.0, f64::NAN]),
            Err(HistoryError::GridNotIncreasing)
        );
        assert!(matches!(
            TimeGrid::labeled([("a", 0.0), ("a", 1.0)]),
            Err(HistoryError::DuplicateTimeLabel(_))
        ));
        let g = TimeGrid::labeled([("t1", 0.0), ("t1.5", 0.5), ("t2", 1.0)]).unwrap();
        assert_eq!(g.index_of_label("t1.5").unwrap(), 1);
        assert!(TimeGrid::new(vec![0.0, 1.0]).unwrap().is_subset_of(&g));
        assert!(!g.is_subset_of(&TimeGrid::new(vec![0.0, 1.0]).unwrap()));
    }

    #[test]
    fn explicit_steps_compose_forward() {
        let u = rotation(0.3);
        let v = y_up();
        let grid = TimeGrid::new(vec![0.0, 1.0, 2.0]).unwrap();
        assert!(matches!(
            PropagatorSet::explicit(2, grid.clone(), vec![u.clone(), v], tol()),
            Err(HistoryError::NonUnitaryStep { index: 1, .. })
        ));
        assert!(matches!(
            PropagatorSet::explicit(2, grid.clone(), vec![u.clone()], tol()),
            Err(HistoryError::StepCountMismatch { .. })
        ));
        let w = rotation(0.7);
        let p =
            PropagatorSet::explicit(2, grid.clone(), vec![u.clone(), w.clone()], tol()).unwrap();
        // Forward evolution t1 -> t3 is W·U; T(t1, t3) is its adjoint.
        assert!(p.transform(2, 0).approx_eq(&(&w * &u), tol()));
        assert!(p
            .transform(0, 2)
            .approx_eq(&(&u.adjoint() * &w.adjoint()), tol()));
        assert!(p
            .transform(1, 1)
            .approx_eq(&ComplexMatrix::identity(2), tol()));
        let coarse = p.restrict(&TimeGrid::new(vec![0.0, 2.0]).unwrap()).unwrap();
        assert!(coarse.steps()[0].approx_eq(&(&w * &u), tol()));
        assert!(matches!(
            p.restrict(&TimeGrid::new(vec![0.0, 3.0]).unwrap()),
            Err(HistoryError::GridNotSuperset)
        ));
    }

    #[test]
    fn hamiltonian_steps_use_time_differences() {
        let h = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let grid = TimeGrid::new(vec![0.0, 0.25, 1.0]).unwrap();
        let p = PropagatorSet::from_hamiltonian(&h, grid, tol()).unwrap();
        let exact = |dt: f64| {
            ComplexMatrix::from_rows(&[
                vec![c(dt.cos(), 0.0), c(0.0, -dt.sin())],
                vec![c(0.0, -dt.sin()), c(dt.cos(), 0.0)],
            ])
            .unwrap()
        };
        assert!(p.steps()[0].approx_eq(&exact(0.25), tol()));
        assert!(p.steps()[1].approx_eq(&exact(0.75), tol()));
        let bad = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        let single = TimeGrid::new(vec![0.0]).unwrap();
        assert!(PropagatorSet::from_hamiltonian(&bad, single, tol()).is_err());
    }

    #[test]
    fn chain_operator_of_identity_history_is_total_transform() {
        let grid = TimeGrid::new(vec![0.0, 1.0, 2.0]).unwrap();
        let p =
            PropagatorSet::explicit(2, grid, vec![rotation(0.4), rotation(0.9)], tol()).unwrap();
        let id = vec![ComplexMatrix::identity(2); 3];
        let k = chain_operator_simple(&id, &p).unwrap();
        assert!(k.approx_eq(&p.transform(0, 2), tol()));
        let kg = chain_operator_general(&ComplexMatrix::identity(8), &p).unwrap();
        assert!(kg.approx_eq(&k, tol()));
    }

    #[test]
    fn general_chain_matches_simple_chain() {
        let grid = TimeGrid::new(vec![0.0, 1.0, 2.0]).unwrap();
        let u = &rotation(0.4) * &(&y_up() + &y_up().complement().scale(c(0.0, 1.0)));
        let p = PropagatorSet::explicit(2, grid, vec![u, rotation(1.3)], tol()).unwrap();
        let comps = vec![x_up(), y_up(), z_up()];
        let simple = chain_operator_simple(&comps, &p).unwrap();
        let dense = ComplexMatrix::tensor_all(&comps).unwrap();
        let general = chain_operator_general(&dense, &p).unwrap();
        assert!(simple.approx_eq(&general, tol()));
    }

    #[test]
    fn single_time_chain_is_identity_map() {
        let p = PropagatorSet::trivial(2, TimeGrid::new(vec![0.0]).unwrap());
        let k = chain_operator_general(&y_up(), &p).unwrap();
        assert!(k.approx_eq(&y_up(), tol()));
        let fam = HistoryFamily::build(
            Arc::new(p),
            named(vec![
                ("y", History::Simple(vec![y_up()])),
                ("z", History::Simple(vec![z_up()])),
            ]),
            FamilySettings::default(),
        );
        // y and z do not commute.
        assert!(matches!(
            fam,
            Err(HistoryError::NonCommutingGenerators { .. })
        ));
    }

    #[test]
    fn functional_is_hermitian() {
        let grid = TimeGrid::new(vec![0.0, 1.0]).unwrap();
        let p = PropagatorSet::explicit(2, grid, vec![rotation(0.5)], tol()).unwrap();
        let a = ComplexMatrix::tensor_all(&[x_up(), z_up()]).unwrap();
        let b = ComplexMatrix::tensor_all(&[y_up(), x_up()]).unwrap();
        let ab = consistency_functional(&a, &b, &p).unwrap();
        let ba = consistency_functional(&b, &a, &p).unwrap();
        assert!((ab - ba.conj()).norm() < 1e-12);
    }

    #[test]
    fn three_time_spin_family_is_inconsistent() {
        let grid = TimeGrid::new(vec![0.0, 1.0, 2.0]).unwrap();
        let p = Arc::new(PropagatorSet::trivial(2, grid));
        let id = ComplexMatrix::identity(2);
        let gens = named(vec![
            ("psi", History::Simple(vec![y_up(), id.clone(), id.clone()])),
            ("z", History::Simple(vec![id.clone(), z_up(), id.clone()])),
            ("x", History::Simple(vec![id.clone(), id.clone(), x_up()])),
        ]);
        let fam = HistoryFamily::build(p, gens, FamilySettings::default()).unwrap();
        assert!(fam.is_product_form());
        assert_eq!(fam.atom_count(), 8);
        assert_eq!(fam.report().verdict, ConsistencyVerdict::Inconsistent);
        assert!(matches!(
            fam.weight(&leaf("psi")),
            Err(HistoryError::InconsistentFamily { .. })
        ));
    }

    #[test]
    fn two_time_families_are_consistent_and_normalized() {
        let grid = TimeGrid::new(vec![0.0, 1.0]).unwrap();
        let p = Arc::new(PropagatorSet::explicit(2, grid, vec![rotation(0.6)], tol()).unwrap());
        let id = ComplexMatrix::identity(2);
        let gens = named(vec![
            ("psi", History::Simple(vec![z_up(), id.clone()])),
            ("x", History::Simple(vec![id.clone(), x_up()])),
        ]);
        let fam = HistoryFamily::build(p, gens, FamilySettings::default()).unwrap();
        assert!(fam.is_consistent());
        let total: f64 = fam.report().weights.iter().sum();
        assert!((total - 2.0).abs() < 1e-12);
        // Born rule: |<x+| R |z+>|^2.
        let theta: f64 = 0.6;
        let born = 0.5 * (theta.cos() + theta.sin()).powi(2);
        let pr = fam
            .conditional_probability(&leaf("x"), &leaf("psi"))
            .unwrap();
        assert!((pr - born).abs() < 1e-12);
        let never = Formula::and(leaf("psi"), Formula::not(leaf("psi")));
        assert!(matches!(
            fam.conditional_probability(&leaf("x"), &never),
            Err(HistoryError::ZeroWeightCondition { .. })
        ));
    }

    #[test]
    fn decompose_recognises_algebra_members_only() {
        let grid = TimeGrid::new(vec![0.0, 1.0]).unwrap();
        let p = Arc::new(PropagatorSet::trivial(2, grid));
        let id = ComplexMatrix::identity(2);
        let gens = named(vec![
            ("a", History::Simple(vec![z_up(), id.clone()])),
            ("b", History::Simple(vec![id.clone(), z_up()])),
        ]);
        let fam = HistoryFamily::build(p, gens, FamilySettings::default()).unwrap();
        let both = History::Simple(vec![z_up(), z_up()]);
        let set = fam.decompose(&both).unwrap();
        let expected = fam.element(&Formula::and(leaf("a"), leaf("b"))).unwrap();
        assert_eq!(set, expected);
        let foreign = History::Simple(vec![x_up(), id.clone()]);
        assert_eq!(fam.decompose(&foreign), Err(HistoryError::NotInAlgebra));
        assert!(matches!(
            fam.generator_atoms("nope"),
            Err(HistoryError::UnknownGenerator(_))
        ));
    }

    #[test]
    fn dense_and_product_forms_agree() {
        let grid = TimeGrid::new(vec![0.0, 1.0, 2.0]).unwrap();
        let p = Arc::new(
            PropagatorSet::explicit(2, grid, vec![rotation(0.3), rotation(0.8)], tol()).unwrap(),
        );
        let id = ComplexMatrix::identity(2);
        let simple = vec![
            ("a", History::Simple(vec![z_up(), id.clone(), id.clone()])),
            ("b", History::Simple(vec![id.clone(), x_up(), id.clone()])),
            ("c", History::Simple(vec![id.clone(), id.clone(), z_up()])),
        ];
        let dense: Vec<(&str, History)> = simple
            .iter()
            .map(|(n, h)| (*n, History::Generalized(h.projector(64).unwrap())))
            .collect();
        let fp = HistoryFamily::build(p.clone(), named(simple), FamilySettings::default()).unwrap();
        let fd = HistoryFamily::build(p, named(dense), FamilySettings::default()).unwrap();
        assert!(fp.is_product_form());
        assert!(!fd.is_product_form());
        assert_eq!(fp.report().verdict, fd.report().verdict);
        assert!((fp.report().relative_offdiag - fd.report().relative_offdiag).abs() < 1e-10);
        for f in [
            leaf("a"),
            Formula::and(leaf("a"), leaf("c")),
            Formula::or(leaf("b"), Formula::not(leaf("c"))),
        ] {
            let sp = fp.element(&f).unwrap();
            let sd = fd.element(&f).unwrap();
            let wp = fp.functional(&sp, &sp);
            let wd = fd.functional(&sd, &sd);
            assert!((wp - wd).norm() < 1e-10, "{f}");
        }
        // Atom projectors of the product form sum to the identity.
        let sum = (0..fp.atom_count()).fold(ComplexMatrix::zeros(8), |acc, a| {
            &acc + &fp.atom_projector(a).unwrap()
        });
        assert!(sum.approx_eq(&ComplexMatrix::identity(8), tol()));
    }

    #[test]
    fn dense_guard_refuses_large_tensor_space() {
        let grid = TimeGrid::new(vec![0.0, 1.0, 2.0]).unwrap();
        let p = Arc::new(PropagatorSet::trivial(2, grid));
        let settings = FamilySettings {
            max_dense_dim: 4,
            ..FamilySettings::default()
        };
        let h = History::Generalized(ComplexMatrix::identity(8));
        assert!(matches!(
            HistoryFamily::build(p, named(vec![("h", h)]), settings),
            Err(HistoryError::TensorSpaceTooLarge { dim: 8, max: 4 })
        ));
    }

    #[test]
    fn lifting_pads_with_identity() {
        let coarse = TimeGrid::new(vec![0.0, 2.0]).unwrap();
        let fine = TimeGrid::new(vec![0.0, 1.0, 2.0]).unwrap();
        let h = History::Simple(vec![z_up(), x_up()]);
        let History::Simple(l) = lift_history(&h, &coarse, &fine).unwrap() else {
            unreachable!()
        };
        assert!(l[1].approx_eq(&ComplexMatrix::identity(2), tol()));
        assert!(l[2].approx_eq(&x_up(), tol()));
        let g = History::Generalized(ComplexMatrix::identity(4));
        assert_eq!(
            lift_history(&g, &coarse, &fine).unwrap_err(),
            HistoryError::GeneralizedLift
        );
    }

    #[test]
    fn compatibility_reports_grid_and_notation_conflicts() {
        let id = ComplexMatrix::identity(2);
        let settings = FamilySettings::default();
        let g12 = TimeGrid::new(vec![0.0, 1.0]).unwrap();
        let g13 = TimeGrid::new(vec![0.0, 2.0]).unwrap();
        let a = HistoryFamily::build(
            Arc::new(PropagatorSet::trivial(2, g12)),
            named(vec![("p", History::Simple(vec![z_up(), id.clone()]))]),
            settings,
        )
        .unwrap();
        let b = HistoryFamily::build(
            Arc::new(PropagatorSet::trivial(2, g13)),
            named(vec![("p", History::Simple(vec![z_up(), id.clone()]))]),
            settings,
        )
        .unwrap();
        let verdict = families_compatible(&[&a, &b], settings).unwrap();
        assert!(matches!(
            verdict,
            FamilyCompatibility::Incompatible(Incompatibility::GridConflict { .. })
        ));

        let g = TimeGrid::new(vec![0.0, 1.0]).unwrap();
        let prop = Arc::new(PropagatorSet::trivial(2, g));
        let c1 = HistoryFamily::build(
            prop.clone(),
            named(vec![("p", History::Simple(vec![z_up(), id.clone()]))]),
            settings,
        )
        .unwrap();
        let c2 = HistoryFamily::build(
            prop.clone(),
            named(vec![("p", History::Simple(vec![x_up(), id.clone()]))]),
            settings,
        )
        .unwrap();
        assert!(matches!(
            families_compatible(&[&c1, &c2], settings).unwrap(),
            FamilyCompatibility::Incompatible(Incompatibility::NotationalConflict { .. })
        ));
        let c3 = HistoryFamily::build(
            prop,
            named(vec![("q", History::Simple(vec![x_up(), id.clone()]))]),
            settings,
        )
        .unwrap();
        assert!(matches!(
            families_compatible(&[&c1, &c3], settings).unwrap(),
            FamilyCompatibility::Incompatible(Incompatibility::NonCommuting { .. })
        ));
    }

    #[test]
    fn inference_over_histories() {
        let id = ComplexMatrix::identity(2);
        let settings = FamilySettings::default();
        let g = TimeGrid::new(vec![0.0, 1.0, 2.0]).unwrap();
        // Identity dynamics: z+ persists.
        let prop = Arc::new(PropagatorSet::trivial(2, g));
        let f1 = HistoryFamily::build(
            prop.clone(),
            named(vec![(
                "z1",
                History::Simple(vec![z_up(), id.clone(), id.clone()]),
            )]),
            settings,
        )
        .unwrap();
        let f2 = HistoryFamily::build(
            prop.clone(),
            named(vec![(
                "z3",
                History::Simple(vec![id.clone(), id.clone(), z_up()]),
            )]),
            settings,
        )
        .unwrap();
        let v = infer_histories(&[(&f1, leaf("z1"))], &[(&f2, leaf("z3"))], settings);
        assert_eq!(v.reason, InferenceReason::Proven);
        assert!((v.assumption_weight.unwrap() - 1.0).abs() < 1e-12);

        let v = infer_histories(
            &[(&f1, leaf("z1")), (&f2, Formula::not(leaf("z3")))],
            &[(&f2, leaf("z3"))],
            settings,
        );
        assert_eq!(v.reason, InferenceReason::ContradictoryAssumptions);

        let fx = HistoryFamily::build(
            prop,
            named(vec![(
                "x3",
                History::Simple(vec![id.clone(), id.clone(), x_up()]),
            )]),
            settings,
        )
        .unwrap();
        let v = infer_histories(&[(&f1, leaf("z1"))], &[(&fx, leaf("x3"))], settings);
        assert_eq!(v.reason, InferenceReason::NotEntailed);
        match v.witness {
            Some(Witness::Conclusion { probability, .. }) => {
                assert!((probability - 0.5).abs() < 1e-12)
            }
            other => panic!("unexpected witness {other:?}"),
        }
    }

    #[test]
    fn reversed_dynamics_preserve_weights() {
        let grid = TimeGrid::new(vec![0.0, 1.0, 3.0]).unwrap();
        let p =
            PropagatorSet::explicit(2, grid, vec![rotation(0.2), rotation(1.0)], tol()).unwrap();
        let r = p.reversed();
        let comps = vec![x_up(), y_up(), z_up()];
        let rev: Vec<ComplexMatrix> = comps.iter().rev().cloned().collect();
        let k = chain_operator_simple(&comps, &p).unwrap();
        let kr = chain_operator_simple(&rev, &r).unwrap();
        assert!(kr.approx_eq(&k.adjoint(), tol()));
        assert!((k.hs_inner(&k) - kr.hs_inner(&kr)).norm() < 1e-12);
    }
}
