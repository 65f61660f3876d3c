//! Finite classical sample spaces: events are subsets, statements map to
//! set operations, and probabilities are weight ratios.

use std::collections::HashMap;

use thiserror::Error;

use crate::framework::Formula;
use crate::linalg::{ComplexMatrix, C64};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassicalError {
    #[error("a sample space needs at least one point")]
    EmptySpace,
    #[error("point weights must be finite and non-negative")]
    InvalidWeight,
    #[error("unbound name `{0}`")]
    UnboundName(String),
    #[error("event over {found} points used with a space of {expected} points")]
    SizeMismatch { expected: usize, found: usize },
    #[error("conditioning event has weight {0}")]
    ZeroWeightCondition(f64),
}

/// Points `0..size` with non-negative weights.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSampleSpace {
    weights: Vec<f64>,
}

impl FiniteSampleSpace {
    /// Unit weight on every point.
    pub fn new(size: usize) -> Result<Self, ClassicalError> {
        Self::weighted(vec![1.0; size])
    }

    pub fn weighted(weights: Vec<f64>) -> Result<Self, ClassicalError> {
        if weights.is_empty() {
            return Err(ClassicalError::EmptySpace);
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ClassicalError::InvalidWeight);
        }
        Ok(Self { weights })
    }

    pub fn size(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Cartesian product; point `(x, y)` has index `x * other.size() + y`
    /// and weight `w(x) w(y)`.
    pub fn product(&self, other: &Self) -> Self {
        let weights = self
            .weights
            .iter()
            .flat_map(|a| other.weights.iter().map(move |b| a * b))
            .collect();
        Self { weights }
    }

    /// The n-fold product of the space with itself.
    pub fn power(&self, n: usize) -> Self {
        (1..n).fold(self.clone(), |acc, _| acc.product(self))
    }

    /// Total weight of an event.
    pub fn weight(&self, e: &Event) -> Result<f64, ClassicalError> {
        self.check(e)?;
        Ok(e.members().map(|i| self.weights[i]).sum())
    }

    fn check(&self, e: &Event) -> Result<(), ClassicalError> {
        if e.len() == self.size() {
            Ok(())
        } else {
            Err(ClassicalError::SizeMismatch {
                expected: self.size(),
                found: e.len(),
            })
        }
    }
}

/// A subset of a sample space, as a membership mask.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Event {
    mask: Vec<bool>,
}

impl Event {
    pub fn empty(size: usize) -> Self {
        Self {
            mask: vec![false; size],
        }
    }

    pub fn full(size: usize) -> Self {
        Self {
            mask: vec![true; size],
        }
    }

    pub fn from_mask(mask: Vec<bool>) -> Self {
        Self { mask }
    }

    pub fn from_indices(size: usize, members: impl IntoIterator<Item = usize>) -> Self {
        let mut mask = vec![false; size];
        for i in members {
            mask[i] = true;
        }
        Self { mask }
    }

    pub fn from_predicate(size: usize, f: impl Fn(usize) -> bool) -> Self {
        Self {
            mask: (0..size).map(f).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn contains(&self, point: usize) -> bool {
        self.mask[point]
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i)
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn complement(&self) -> Self {
        Self {
            mask: self.mask.iter().map(|b| !b).collect(),
        }
    }

    pub fn intersection(&self, other: &Self) -> Self {
        Self {
            mask: self
                .mask
                .iter()
                .zip(&other.mask)
                .map(|(a, b)| *a && *b)
                .collect(),
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        Self {
            mask: self
                .mask
                .iter()
                .zip(&other.mask)
                .map(|(a, b)| *a || *b)
                .collect(),
        }
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.mask.iter().zip(&other.mask).all(|(a, b)| !a || *b)
    }
}

/// ∼ ↦ complement, ∧ ↦ intersection, ∨ ↦ union.
pub fn classical_phi(
    f: &Formula,
    bindings: &HashMap<String, Event>,
) -> Result<Event, ClassicalError> {
    let mut size = None;
    let result = f.fold(
        &mut |name: &String| {
            let e = bindings
                .get(name)
                .ok_or_else(|| ClassicalError::UnboundName(name.clone()))?;
            match size {
                Some(n) if n != e.len() => Err(ClassicalError::SizeMismatch {
                    expected: n,
                    found: e.len(),
                }),
                _ => {
                    size = Some(e.len());
                    Ok(e.clone())
                }
            }
        },
        &|e: Event| e.complement(),
        &|a: Event, b: Event| a.intersection(&b),
        &|a: Event, b: Event| a.union(&b),
    )?;
    Ok(result)
}

/// True iff the intersection of the assumptions lies inside the
/// conclusion. With no assumptions the whole space is assumed.
pub fn classical_infer(assumptions: &[Event], conclusion: &Event) -> Result<bool, ClassicalError> {
    let size = conclusion.len();
    let mut a = Event::full(size);
    for e in assumptions {
        if e.len() != size {
            return Err(ClassicalError::SizeMismatch {
                expected: size,
                found: e.len(),
            });
        }
        a = a.intersection(e);
    }
    Ok(a.is_subset(conclusion))
}

/// Pr(q | p) = W(q ∩ p) / W(p).
pub fn classical_cond_prob(
    space: &FiniteSampleSpace,
    q: &Event,
    p: &Event,
) -> Result<f64, ClassicalError> {
    let wp = space.weight(p)?;
    if wp <= 0.0 {
        return Err(ClassicalError::ZeroWeightCondition(wp));
    }
    Ok(space.weight(&q.intersection(p))? / wp)
}

/// The diagonal 0/1 projector with ones at the members of `e`.
pub fn diagonal_embedding(e: &Event) -> ComplexMatrix {
    ComplexMatrix::diagonal(
        &e.mask
            .iter()
            .map(|&b| C64::new(if b { 1.0 } else { 0.0 }, 0.0))
            .collect::<Vec<_>>(),
    )
}
