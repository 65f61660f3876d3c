//! Finite-dimensional quantum reasoning with frameworks and consistent
//! histories.

pub mod classical;
pub mod framework;
pub mod histories;
pub mod linalg;
pub mod logic;
pub mod models;

pub use framework::{AtomSet, Compatibility, Formula, Framework, FrameworkError, Incompatibility};
pub use histories::{
    ConsistencyReport, ConsistencyVerdict, FamilyCompatibility, FamilySettings, History,
    HistoryError, HistoryFamily, HistoryFormula, HistoryLeaf, PropagatorSet, TimeGrid,
};
pub use linalg::{ComplexMatrix, LinalgError, Tolerance, C64};
pub use logic::{Description, InferenceReason, InferenceVerdict, Witness};
