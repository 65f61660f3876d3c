//! Statements, the statement-to-projector map, and Boolean algebras of
//! commuting projectors.
//!
//! A [`Framework`] is generated by named projectors. Its minimal elements
//! (atoms) are the nonzero sign products Π Q_i with Q_i ∈ {P_i, I − P_i}
//! taken over the generators in declaration order. Each atom remembers its
//! sign pattern, so every element of the algebra is an [`AtomSet`].

use std::fmt;
use std::ops::{BitAnd, BitOr, Not};

use indexmap::IndexMap;
use thiserror::Error;

use crate::linalg::{ComplexMatrix, LinalgError, Tolerance};

/// Upper bound on generators per framework (2^k sign products).
pub const MAX_GENERATORS: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrameworkError {
    #[error("generators `{left}` and `{right}` do not commute")]
    NonCommutingGenerators { left: String, right: String },
    #[error("generator `{0}` is not a projector")]
    NonProjectorGenerator(String),
    #[error("generator `{name}` has dimension {found}, expected {expected}")]
    DimensionMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("unknown statement `{0}`")]
    UnknownStatementName(String),
    #[error("projector is not an element of the framework's Boolean algebra")]
    NotInAlgebra,
    #[error("statement `{0}` is bound to different projectors in different frameworks")]
    NotationalConflict(String),
    #[error("frameworks are incompatible: {0}")]
    IncompatibleFrameworks(Incompatibility),
    #[error("{count} generators exceed the limit of {max}")]
    TooManyGenerators { count: usize, max: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Why a collection of frameworks cannot be combined.
#[derive(Debug, Clone, PartialEq)]
pub enum Incompatibility {
    NonCommuting {
        left: String,
        right: String,
    },
    NotationalConflict {
        name: String,
    },
    /// Families that cannot be placed on a common grid with common dynamics.
    GridConflict {
        reason: String,
    },
    /// The generated family fails the consistency test.
    Inconsistent {
        relative_offdiag: f64,
    },
}

impl fmt::Display for Incompatibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NonCommuting { left, right } => {
                write!(f, "`{left}` does not commute with `{right}`")
            }
            Self::NotationalConflict { name } => write!(f, "`{name}` names different projectors"),
            Self::GridConflict { reason } => write!(f, "grid conflict: {reason}"),
            Self::Inconsistent { relative_offdiag } => {
                write!(f, "generated family is inconsistent (relative off-diagonal {relative_offdiag:.3e})")
            }
        }
    }
}

/// Outcome of a compatibility check.
#[derive(Debug, Clone, PartialEq)]
pub enum Compatibility {
    Compatible,
    Incompatible(Incompatibility),
}

impl Compatibility {
    pub fn is_compatible(&self) -> bool {
        matches!(self, Self::Compatible)
    }
}

/// A statement built from elementary statements with ∼, ∧ and ∨.
///
/// Leaves are usually statement names; the histories module uses richer
/// leaves.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula<L = String> {
    Leaf(L),
    Not(Box<Formula<L>>),
    And(Box<Formula<L>>, Box<Formula<L>>),
    Or(Box<Formula<L>>, Box<Formula<L>>),
}

impl<L> Formula<L> {
    pub fn leaf(l: impl Into<L>) -> Self {
        Self::Leaf(l.into())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Self) -> Self {
        Self::Not(Box::new(f))
    }

    pub fn and(a: Self, b: Self) -> Self {
        Self::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Self, b: Self) -> Self {
        Self::Or(Box::new(a), Box::new(b))
    }

    /// Conjunction of a non-empty list.
    pub fn all(mut items: Vec<Self>) -> Option<Self> {
        let first = if items.is_empty() {
            return None;
        } else {
            items.remove(0)
        };
        Some(items.into_iter().fold(first, Self::and))
    }

    /// Disjunction of a non-empty list.
    pub fn any(mut items: Vec<Self>) -> Option<Self> {
        let first = if items.is_empty() {
            return None;
        } else {
            items.remove(0)
        };
        Some(items.into_iter().fold(first, Self::or))
    }

    pub fn leaves(&self) -> Vec<&L> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a L>) {
        match self {
            Self::Leaf(l) => out.push(l),
            Self::Not(f) => f.collect_leaves(out),
            Self::And(a, b) | Self::Or(a, b) => {
                a.collect_leaves(out);
                b.collect_leaves(out);
            }
        }
    }

    /// Evaluates the formula over a Boolean algebra given by `leaf`.
    pub fn fold<T, E>(
        &self,
        leaf: &mut impl FnMut(&L) -> Result<T, E>,
        not: &impl Fn(T) -> T,
        and: &impl Fn(T, T) -> T,
        or: &impl Fn(T, T) -> T,
    ) -> Result<T, E> {
        Ok(match self {
            Self::Leaf(l) => leaf(l)?,
            Self::Not(f) => not(f.fold(leaf, not, and, or)?),
            Self::And(a, b) => {
                let x = a.fold(leaf, not, and, or)?;
                and(x, b.fold(leaf, not, and, or)?)
            }
            Self::Or(a, b) => {
                let x = a.fold(leaf, not, and, or)?;
                or(x, b.fold(leaf, not, and, or)?)
            }
        })
    }
}

impl<L: fmt::Display> fmt::Display for Formula<L> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Leaf(l) => write!(f, "{l}"),
            Self::Not(x) => write!(f, "~{x}"),
            Self::And(a, b) => write!(f, "({a} & {b})"),
            Self::Or(a, b) => write!(f, "({a} | {b})"),
        }
    }
}

/// A subset of a framework's atoms; the bitmask m_α of an algebra element.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AtomSet {
    bits: Vec<bool>,
}

impl AtomSet {
    pub fn empty(len: usize) -> Self {
        Self {
            bits: vec![false; len],
        }
    }

    pub fn full(len: usize) -> Self {
        Self {
            bits: vec![true; len],
        }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn contains(&self, atom: usize) -> bool {
        self.bits[atom]
    }

    pub fn insert(&mut self, atom: usize) {
        self.bits[atom] = true;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i)
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_none(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }
}

impl BitAnd for AtomSet {
    type Output = AtomSet;
    fn bitand(self, rhs: AtomSet) -> AtomSet {
        let bits = self
            .bits
            .iter()
            .zip(&rhs.bits)
            .map(|(&a, &b)| a && b)
            .collect();
        AtomSet { bits }
    }
}

impl BitOr for AtomSet {
    type Output = AtomSet;
    fn bitor(self, rhs: AtomSet) -> AtomSet {
        let bits = self
            .bits
            .iter()
            .zip(&rhs.bits)
            .map(|(&a, &b)| a || b)
            .collect();
        AtomSet { bits }
    }
}

impl Not for AtomSet {
    type Output = AtomSet;
    fn not(self) -> AtomSet {
        AtomSet {
            bits: self.bits.iter().map(|&b| !b).collect(),
        }
    }
}

/// Refines `I` by each projector in turn, keeping nonzero pieces.
///
/// Returns the atoms with their sign patterns (true = under P_i). The atom
/// order is the lexicographic order of sign patterns with P before I − P.
pub(crate) fn sign_product_atoms(
    dim: usize,
    projectors: &[&ComplexMatrix],
) -> Vec<(ComplexMatrix, Vec<bool>)> {
    let mut atoms = vec![(ComplexMatrix::identity(dim), Vec::new())];
    for p in projectors {
        let q = p.complement();
        let mut next = Vec::with_capacity(atoms.len() * 2);
        for (atom, signs) in atoms {
            for (factor, sign) in [(*p, true), (&q, false)] {
                let piece = &atom * factor;
                // A product of commuting projectors is a projector; its trace
                // is its rank.
                if piece.trace().re > 0.5 {
                    let mut s = signs.clone();
                    s.push(sign);
                    next.push((piece, s));
                }
            }
        }
        atoms = next;
    }
    atoms
}

/// A Boolean algebra of commuting projectors generated by named projectors.
#[derive(Debug, Clone)]
pub struct Framework {
    dim: usize,
    generators: IndexMap<String, ComplexMatrix>,
    atoms: Vec<ComplexMatrix>,
    signatures: Vec<Vec<bool>>,
    tol: Tolerance,
}

impl Framework {
    /// Builds the framework generated by `generators`.
    pub fn build(
        dim: usize,
        generators: IndexMap<String, ComplexMatrix>,
        tol: Tolerance,
    ) -> Result<Self, FrameworkError> {
        if generators.len() > MAX_GENERATORS {
            return Err(FrameworkError::TooManyGenerators {
                count: generators.len(),
                max: MAX_GENERATORS,
            });
        }
        for (name, p) in &generators {
            if p.dim() != dim {
                return Err(FrameworkError::DimensionMismatch {
                    name: name.clone(),
                    expected: dim,
                    found: p.dim(),
                });
            }
            if !p.is_projector(tol) {
                return Err(FrameworkError::NonProjectorGenerator(name.clone()));
            }
        }
        let entries: Vec<(&String, &ComplexMatrix)> = generators.iter().collect();
        for (i, (a, p)) in entries.iter().enumerate() {
            for (b, q) in &entries[i + 1..] {
                if !p.commutes(q, tol)? {
                    return Err(FrameworkError::NonCommutingGenerators {
                        left: (*a).clone(),
                        right: (*b).clone(),
                    });
                }
            }
        }
        let projectors: Vec<&ComplexMatrix> = generators.values().collect();
        let (atoms, signatures) = sign_product_atoms(dim, &projectors).into_iter().unzip();
        Ok(Self {
            dim,
            generators,
            atoms,
            signatures,
            tol,
        })
    }

    /// The trivial framework {0, I}.
    pub fn trivial(dim: usize, tol: Tolerance) -> Self {
        Self::build(dim, IndexMap::new(), tol).expect("empty generator set is always valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tolerance(&self) -> Tolerance {
        self.tol
    }

    pub fn generators(&self) -> &IndexMap<String, ComplexMatrix> {
        &self.generators
    }

    pub fn generator(&self, name: &str) -> Option<&ComplexMatrix> {
        self.generators.get(name)
    }

    pub fn atoms(&self) -> &[ComplexMatrix] {
        &self.atoms
    }

    /// Sign pattern of atom `atom` over the generators.
    pub fn signature(&self, atom: usize) -> &[bool] {
        &self.signatures[atom]
    }

    /// Atoms lying under the named generator.
    pub fn generator_atoms(&self, name: &str) -> Result<AtomSet, FrameworkError> {
        let index = self
            .generators
            .get_index_of(name)
            .ok_or_else(|| FrameworkError::UnknownStatementName(name.to_owned()))?;
        Ok(AtomSet::from_bits(
            self.signatures.iter().map(|s| s[index]).collect(),
        ))
    }

    /// Realized projector Σ_{α ∈ set} M^(α).
    pub fn realize(&self, set: &AtomSet) -> ComplexMatrix {
        set.indices()
            .fold(ComplexMatrix::zeros(self.dim), |acc, i| {
                &acc + &self.atoms[i]
            })
    }

    /// φ(f) computed by matrix algebra: ∼ ↦ I − P, ∧ ↦ PQ, ∨ ↦ P + Q − PQ.
    pub fn phi(&self, formula: &Formula) -> Result<ComplexMatrix, FrameworkError> {
        formula.fold(
            &mut |name: &String| {
                self.generators
                    .get(name)
                    .cloned()
                    .ok_or_else(|| FrameworkError::UnknownStatementName(name.clone()))
            },
            &|p: ComplexMatrix| p.complement(),
            &|p: ComplexMatrix, q: ComplexMatrix| &p * &q,
            &|p: ComplexMatrix, q: ComplexMatrix| {
                let pq = &p * &q;
                &(&p + &q) - &pq
            },
        )
    }

    /// φ(f) as a set of atoms, computed by set operations on sign patterns.
    pub fn phi_atoms(&self, formula: &Formula) -> Result<AtomSet, FrameworkError> {
        formula.fold(
            &mut |name: &String| self.generator_atoms(name),
            &|a: AtomSet| !a,
            &|a: AtomSet, b: AtomSet| a & b,
            &|a: AtomSet, b: AtomSet| a | b,
        )
    }

    /// Writes `p` as a sum of atoms; fails when `p` is not in the algebra.
    pub fn decompose(&self, p: &ComplexMatrix) -> Result<AtomSet, FrameworkError> {
        if p.dim() != self.dim {
            return Err(FrameworkError::DimensionMismatch {
                name: "<projector>".into(),
                expected: self.dim,
                found: p.dim(),
            });
        }
        let bits = self
            .atoms
            .iter()
            .map(|m| (p * m).approx_eq(m, self.tol))
            .collect();
        let set = AtomSet::from_bits(bits);
        if self.realize(&set).approx_eq(p, self.tol) {
            Ok(set)
        } else {
            Err(FrameworkError::NotInAlgebra)
        }
    }

    pub fn contains(&self, p: &ComplexMatrix) -> bool {
        self.decompose(p).is_ok()
    }
}

/// Checks whether all algebras pairwise commute, and that shared statement
/// names denote the same projector.
pub fn frameworks_compatible_single_time(
    frameworks: &[&Framework],
    tol: Tolerance,
) -> Result<Compatibility, FrameworkError> {
    let Some(first) = frameworks.first() else {
        return Ok(Compatibility::Compatible);
    };
    for fw in frameworks {
        if fw.dim() != first.dim() {
            return Err(FrameworkError::DimensionMismatch {
                name: "<framework>".into(),
                expected: first.dim(),
                found: fw.dim(),
            });
        }
    }
    let mut seen: IndexMap<&str, &ComplexMatrix> = IndexMap::new();
    for fw in frameworks {
        for (name, p) in fw.generators() {
            match seen.get(name.as_str()) {
                Some(q) if !q.approx_eq(p, tol) => {
                    return Ok(Compatibility::Incompatible(
                        Incompatibility::NotationalConflict { name: name.clone() },
                    ))
                }
                Some(_) => {}
                None => {
                    seen.insert(name, p);
                }
            }
        }
    }
    // Generators commute pairwise iff the generated algebras do; checking
    // generators lets the diagnostic name the offending statements.
    for (i, a) in frameworks.iter().enumerate() {
        for b in &frameworks[i + 1..] {
            for (na, p) in a.generators() {
                for (nb, q) in b.generators() {
                    if !p.commutes(q, tol)? {
                        return Ok(Compatibility::Incompatible(Incompatibility::NonCommuting {
                            left: na.clone(),
                            right: nb.clone(),
                        }));
                    }
                }
            }
        }
    }
    Ok(Compatibility::Compatible)
}

/// The smallest framework containing every input framework.
pub fn generated_framework(
    frameworks: &[&Framework],
    tol: Tolerance,
) -> Result<Framework, FrameworkError> {
    if let Compatibility::Incompatible(why) = frameworks_compatible_single_time(frameworks, tol)? {
        return Err(FrameworkError::IncompatibleFrameworks(why));
    }
    let dim = frameworks.first().map_or(1, |f| f.dim());
    let mut generators = IndexMap::new();
    for fw in frameworks {
        for (name, p) in fw.generators() {
            generators.entry(name.clone()).or_insert_with(|| p.clone());
        }
    }
    Framework::build(dim, generators, tol)
}
