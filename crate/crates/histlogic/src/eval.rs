//! Query evaluation against an elaborated environment.

use std::collections::HashMap;

use histlogic_core::histories::{families_compatible, infer_histories, FamilyCompatibility};
use histlogic_core::{HistoryFamily, HistoryFormula, InferenceReason, C64};

use crate::env::{ElabQuery, Environment, Expectation, QueryKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Failed,
    Error,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Failed => "failed",
            Status::Error => "error",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConsistencySummary {
    pub consistent: bool,
    pub atoms: usize,
    pub relative_offdiag: f64,
    pub max_weight: f64,
    pub weights: Vec<f64>,
    pub gram: Vec<Vec<C64>>,
}

#[derive(Debug, Clone)]
pub enum Outcome {
    Value(f64),
    Consistency(ConsistencySummary),
    Inference {
        reason: InferenceReason,
        assumption_weight: Option<f64>,
        witness: Option<String>,
    },
    Compatibility {
        compatible: bool,
        atoms: Option<usize>,
        reason: Option<String>,
    },
    Error(String),
}

impl Outcome {
    /// The verdict word used by `expect` clauses.
    pub fn word(&self) -> Option<&'static str> {
        Some(match self {
            Outcome::Value(_) => return None,
            Outcome::Consistency(c) if c.consistent => "consistent",
            Outcome::Consistency(_) => "inconsistent",
            Outcome::Inference { reason, .. } => match reason {
                InferenceReason::Proven => "proven",
                InferenceReason::NotEntailed => "not_entailed",
                InferenceReason::IncompatibleFrameworks => "incompatible_frameworks",
                InferenceReason::ContradictoryAssumptions => "contradictory_assumptions",
            },
            Outcome::Compatibility {
                compatible: true, ..
            } => "compatible",
            Outcome::Compatibility { .. } => "incompatible",
            Outcome::Error(_) => "error",
        })
    }

    fn positive(&self) -> bool {
        matches!(
            self.word(),
            None | Some("consistent" | "proven" | "compatible")
        )
    }
}

#[derive(Debug, Clone)]
pub struct QueryResult {
    pub index: usize,
    pub query: ElabQuery,
    pub outcome: Outcome,
    pub status: Status,
}

/// Evaluates queries, building each family at most once.
pub struct Evaluator<'a> {
    env: &'a Environment,
    built: HashMap<String, Result<HistoryFamily, String>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(env: &'a Environment) -> Self {
        Self {
            env,
            built: HashMap::new(),
        }
    }

    fn family(&mut self, name: &str) -> Result<&HistoryFamily, String> {
        if !self.built.contains_key(name) {
            let built = match self.env.propagators() {
                None => Err("no `times` declared".to_owned()),
                Some(props) => HistoryFamily::build(
                    props.clone(),
                    self.env.families[name].clone(),
                    self.env.settings,
                )
                .map_err(|e| format!("family {name}: {e}")),
            };
            self.built.insert(name.to_owned(), built);
        }
        self.built[name].as_ref().map_err(Clone::clone)
    }

    fn families(&mut self, names: &[&str]) -> Result<Vec<HistoryFamily>, String> {
        names.iter().map(|n| self.family(n).cloned()).collect()
    }

    fn outcome(&mut self, kind: &QueryKind) -> Outcome {
        let settings = self.env.settings;
        let result = match kind {
            QueryKind::Prob {
                target,
                given,
                family,
            } => self
                .family(family)
                .and_then(|f| {
                    f.conditional_probability(target, given)
                        .map_err(|e| e.to_string())
                })
                .map(Outcome::Value),
            QueryKind::Weight { target, family } => self
                .family(family)
                .and_then(|f| f.weight(target).map_err(|e| e.to_string()))
                .map(Outcome::Value),
            QueryKind::Consistent { family } => self.family(family).map(|f| {
                let r = f.report();
                Outcome::Consistency(ConsistencySummary {
                    consistent: r.is_consistent(),
                    atoms: f.atom_count(),
                    relative_offdiag: r.relative_offdiag,
                    max_weight: r.max_weight,
                    weights: r.weights.clone(),
                    gram: r.gram.clone(),
                })
            }),
            QueryKind::Compatible { families } => {
                let names: Vec<&str> = families.iter().map(String::as_str).collect();
                self.families(&names).and_then(|fams| {
                    let refs: Vec<&HistoryFamily> = fams.iter().collect();
                    match families_compatible(&refs, settings).map_err(|e| e.to_string())? {
                        FamilyCompatibility::Compatible(g) => Ok(Outcome::Compatibility {
                            compatible: true,
                            atoms: Some(g.atom_count()),
                            reason: None,
                        }),
                        FamilyCompatibility::Incompatible(why) => Ok(Outcome::Compatibility {
                            compatible: false,
                            atoms: None,
                            reason: Some(why.to_string()),
                        }),
                    }
                })
            }
            QueryKind::Infer {
                assumptions,
                conclusions,
            } => {
                let names: Vec<&str> = assumptions
                    .iter()
                    .chain(conclusions)
                    .map(|(f, _)| f.as_str())
                    .collect();
                self.families(&names).map(|fams| {
                    let split = assumptions.len();
                    let formulas: Vec<&HistoryFormula> = assumptions
                        .iter()
                        .chain(conclusions)
                        .map(|(_, h)| h)
                        .collect();
                    let pairs: Vec<(&HistoryFamily, HistoryFormula)> = fams
                        .iter()
                        .zip(formulas)
                        .map(|(f, h)| (f, h.clone()))
                        .collect();
                    let v = infer_histories(&pairs[..split], &pairs[split..], settings);
                    Outcome::Inference {
                        reason: v.reason,
                        assumption_weight: v.assumption_weight,
                        witness: v.witness.map(|w| w.to_string()),
                    }
                })
            }
        };
        result.unwrap_or_else(Outcome::Error)
    }

    pub fn run(&mut self, index: usize, query: &ElabQuery) -> QueryResult {
        let outcome = self.outcome(&query.kind);
        let eps = self.env.settings.tol.eps;
        let status = match (&query.expect, &outcome) {
            (Some(Expectation::Word(w)), o) if w == "error" => {
                if matches!(o, Outcome::Error(_)) {
                    Status::Ok
                } else {
                    Status::Failed
                }
            }
            (_, Outcome::Error(_)) => Status::Error,
            (Some(Expectation::Value(v)), Outcome::Value(x)) => {
                if (x - v).abs() <= eps {
                    Status::Ok
                } else {
                    Status::Failed
                }
            }
            (Some(Expectation::Word(w)), o) => {
                if o.word() == Some(w.as_str()) {
                    Status::Ok
                } else {
                    Status::Failed
                }
            }
            (Some(Expectation::Value(_)), _) => Status::Failed,
            (None, o) => {
                if o.positive() {
                    Status::Ok
                } else {
                    Status::Failed
                }
            }
        };
        QueryResult {
            index,
            query: query.clone(),
            outcome,
            status,
        }
    }

    pub fn run_all(&mut self) -> Vec<QueryResult> {
        let queries = self.env.queries.clone();
        queries
            .iter()
            .enumerate()
            .map(|(i, q)| self.run(i + 1, q))
            .collect()
    }
}
