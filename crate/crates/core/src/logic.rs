//! Truth, descriptions and valid inference for a quantum system at one time.

use std::fmt;
use std::sync::Arc;

use crate::framework::{
    frameworks_compatible_single_time, generated_framework, Compatibility, Formula, Framework,
    FrameworkError, Incompatibility,
};
use crate::linalg::{ComplexMatrix, Tolerance};

/// A framework together with one of its statements.
#[derive(Debug, Clone)]
pub struct Description {
    pub framework: Arc<Framework>,
    pub statement: Formula,
}

impl Description {
    pub fn new(framework: Arc<Framework>, statement: Formula) -> Self {
        Self {
            framework,
            statement,
        }
    }

    pub fn projector(&self) -> Result<ComplexMatrix, FrameworkError> {
        self.framework.phi(&self.statement)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InferenceReason {
    Proven,
    NotEntailed,
    IncompatibleFrameworks,
    ContradictoryAssumptions,
}

impl fmt::Display for InferenceReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Proven => "Proven",
            Self::NotEntailed => "NotEntailed",
            Self::IncompatibleFrameworks => "IncompatibleFrameworks",
            Self::ContradictoryAssumptions => "ContradictoryAssumptions",
        })
    }
}

/// Evidence attached to a failed inference.
#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    Incompatible(Incompatibility),
    /// Conclusion `index` holds with conditional probability `probability`
    /// (1 is required).
    Conclusion {
        index: usize,
        probability: f64,
    },
    /// The assumptions' weight.
    AssumptionWeight(f64),
    /// A framework could not be evaluated at all.
    Error(String),
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Incompatible(why) => write!(f, "{why}"),
            Self::Conclusion { index, probability } => {
                write!(
                    f,
                    "conclusion {} holds with probability {probability}",
                    index + 1
                )
            }
            Self::AssumptionWeight(w) => write!(f, "assumption weight {w}"),
            Self::Error(e) => f.write_str(e),
        }
    }
}

#[derive(Debug, Clone)]
pub struct InferenceVerdict {
    pub reason: InferenceReason,
    /// The product of the assumption projectors (A); `None` when the
    /// frameworks could not be combined.
    pub assumption_projector: Option<ComplexMatrix>,
    /// Tr A for single-time arguments, W(Ã) for histories.
    pub assumption_weight: Option<f64>,
    pub witness: Option<Witness>,
}

impl InferenceVerdict {
    pub fn valid(&self) -> bool {
        self.reason == InferenceReason::Proven
    }

    fn incompatible(why: Incompatibility) -> Self {
        Self {
            reason: InferenceReason::IncompatibleFrameworks,
            assumption_projector: None,
            assumption_weight: None,
            witness: Some(Witness::Incompatible(why)),
        }
    }
}

/// Truth rule: `b` implies `s` iff B·φ(s) = B.
pub fn entails(b: &ComplexMatrix, s: &Description) -> Result<bool, FrameworkError> {
    let fw = &s.framework;
    fw.decompose(b)?;
    let image = fw.phi(&s.statement)?;
    Ok((b * &image).approx_eq(b, fw.tolerance()))
}

/// The generated framework of a compatible collection and the product of
/// the descriptions' projectors.
pub fn master_description(
    descriptions: &[Description],
    tol: Tolerance,
) -> Result<(Framework, ComplexMatrix), FrameworkError> {
    let frameworks: Vec<&Framework> = descriptions.iter().map(|d| d.framework.as_ref()).collect();
    let generated = generated_framework(&frameworks, tol)?;
    let mut product = ComplexMatrix::identity(generated.dim());
    for d in descriptions {
        product = &product * &d.projector()?;
    }
    Ok((generated, product))
}

/// Checks an argument: the union of all frameworks must be compatible, the
/// assumption product A nonzero, and φ(c)·A = A for every conclusion.
pub fn infer_single_time(
    assumptions: &[Description],
    conclusions: &[Description],
    tol: Tolerance,
) -> InferenceVerdict {
    match try_infer(assumptions, conclusions, tol) {
        Ok(v) => v,
        Err(FrameworkError::IncompatibleFrameworks(why)) => InferenceVerdict::incompatible(why),
        Err(e) => InferenceVerdict {
            reason: InferenceReason::IncompatibleFrameworks,
            assumption_projector: None,
            assumption_weight: None,
            witness: Some(Witness::Error(e.to_string())),
        },
    }
}

fn try_infer(
    assumptions: &[Description],
    conclusions: &[Description],
    tol: Tolerance,
) -> Result<InferenceVerdict, FrameworkError> {
    let frameworks: Vec<&Framework> = assumptions
        .iter()
        .chain(conclusions)
        .map(|d| d.framework.as_ref())
        .collect();
    if let Compatibility::Incompatible(why) = frameworks_compatible_single_time(&frameworks, tol)? {
        return Ok(InferenceVerdict::incompatible(why));
    }
    let Some(dim) = frameworks.first().map(|f| f.dim()) else {
        // Nothing assumed and nothing concluded.
        return Ok(InferenceVerdict {
            reason: InferenceReason::Proven,
            assumption_projector: None,
            assumption_weight: None,
            witness: None,
        });
    };
    let mut a = ComplexMatrix::identity(dim);
    for d in assumptions {
        a = &a * &d.projector()?;
    }
    // A is a product of commuting projectors, so its trace is its rank.
    let rank = a.trace().re;
    if rank < 0.5 {
        return Ok(InferenceVerdict {
            reason: InferenceReason::ContradictoryAssumptions,
            assumption_projector: Some(a),
            assumption_weight: Some(rank.max(0.0)),
            witness: Some(Witness::AssumptionWeight(rank.max(0.0))),
        });
    }
    for (index, c) in conclusions.iter().enumerate() {
        let image = c.projector()?;
        let ca = &image * &a;
        if !ca.approx_eq(&a, tol) {
            return Ok(InferenceVerdict {
                reason: InferenceReason::NotEntailed,
                witness: Some(Witness::Conclusion {
                    index,
                    probability: ca.trace().re / rank,
                }),
                assumption_projector: Some(a),
                assumption_weight: Some(rank),
            });
        }
    }
    Ok(InferenceVerdict {
        reason: InferenceReason::Proven,
        assumption_projector: Some(a),
        assumption_weight: Some(rank),
        witness: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use indexmap::IndexMap;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn leaf(s: &str) -> Formula {
        Formula::leaf(s)
    }

    fn fw(gens: Vec<(&str, ComplexMatrix)>) -> Arc<Framework> {
        let dim = gens[0].1.dim();
        let gens: IndexMap<String, ComplexMatrix> =
            gens.into_iter().map(|(n, p)| (n.to_owned(), p)).collect();
        Arc::new(Framework::build(dim, gens, tol()).unwrap())
    }

    fn diag(bits: &[u8]) -> ComplexMatrix {
        ComplexMatrix::diagonal_mask(&bits.iter().map(|&b| b == 1).collect::<Vec<_>>())
    }

    fn sx_plus() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]).unwrap()
    }

    fn sz_plus() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]]).unwrap()
    }

    #[test]
    fn entails_examples() {
        // Commuting P, Q in dimension 4 with PQ != P and Q != I.
        let f = fw(vec![("p", diag(&[1, 1, 0, 0])), ("q", diag(&[0, 1, 1, 0]))]);
        let p = f.phi(&leaf("p")).unwrap();
        let pq = f.phi(&Formula::and(leaf("p"), leaf("q"))).unwrap();
        assert!(entails(
            &p,
            &Description::new(f.clone(), Formula::or(leaf("p"), leaf("q")))
        )
        .unwrap());
        assert!(entails(&pq, &Description::new(f.clone(), leaf("p"))).unwrap());
        assert!(!entails(
            &p,
            &Description::new(f.clone(), Formula::and(leaf("p"), leaf("q")))
        )
        .unwrap());
        // Explicit arithmetic behind the last case: P·(PQ) = diag(0,1,0,0) != P.
        assert!(!(&p * &pq).approx_eq(&p, tol()));

        let outside = sx_plus().tensor(&ComplexMatrix::identity(2)).unwrap();
        assert_eq!(
            entails(&outside, &Description::new(f, leaf("p"))).unwrap_err(),
            FrameworkError::NotInAlgebra
        );
    }

    #[test]
    fn master_description_examples() {
        let f = fw(vec![("p", diag(&[1, 0, 1]))]);
        let (g, d) = master_description(&[Description::new(f.clone(), leaf("p"))], tol()).unwrap();
        assert_eq!(g.generators().len(), 1);
        assert!(d.approx_eq(&diag(&[1, 0, 1]), tol()));

        let (_, d) = master_description(
            &[
                Description::new(f.clone(), leaf("p")),
                Description::new(f, Formula::not(leaf("p"))),
            ],
            tol(),
        )
        .unwrap();
        assert!(d.is_zero(tol()));

        let id = ComplexMatrix::identity(2);
        let p = sz_plus();
        let q = sx_plus();
        let a = fw(vec![("p", p.tensor(&id).unwrap())]);
        let b = fw(vec![("q", id.tensor(&q).unwrap())]);
        let (g, d) = master_description(
            &[
                Description::new(a, leaf("p")),
                Description::new(b, leaf("q")),
            ],
            tol(),
        )
        .unwrap();
        assert!(d.approx_eq(&p.tensor(&q).unwrap(), tol()));
        assert!(g.contains(&d));
    }

    #[test]
    fn inference_examples() {
        let f = fw(vec![("p", diag(&[1, 1, 0, 0])), ("q", diag(&[0, 1, 1, 0]))]);
        let v = infer_single_time(
            &[Description::new(f.clone(), leaf("p"))],
            &[Description::new(
                f.clone(),
                Formula::or(leaf("p"), leaf("q")),
            )],
            tol(),
        );
        assert!(v.valid());

        let v = infer_single_time(
            &[],
            &[Description::new(
                f.clone(),
                Formula::or(leaf("p"), Formula::not(leaf("p"))),
            )],
            tol(),
        );
        assert!(v.valid());
        assert!(v
            .assumption_projector
            .unwrap()
            .approx_eq(&ComplexMatrix::identity(4), tol()));

        let v = infer_single_time(
            &[Description::new(f.clone(), leaf("p"))],
            &[Description::new(f.clone(), leaf("q"))],
            tol(),
        );
        assert_eq!(v.reason, InferenceReason::NotEntailed);
        assert_eq!(
            v.witness,
            Some(Witness::Conclusion {
                index: 0,
                probability: 0.5
            })
        );

        let v = infer_single_time(
            &[
                Description::new(f.clone(), leaf("p")),
                Description::new(f.clone(), Formula::not(leaf("p"))),
            ],
            &[Description::new(f, leaf("q"))],
            tol(),
        );
        assert_eq!(v.reason, InferenceReason::ContradictoryAssumptions);
    }

    #[test]
    fn incompatible_frameworks_block_inference() {
        let fx = fw(vec![("sx", sx_plus())]);
        let fz = fw(vec![("sz", sz_plus())]);
        let v = infer_single_time(
            &[Description::new(fx.clone(), leaf("sx"))],
            &[Description::new(
                fz.clone(),
                Formula::or(leaf("sz"), Formula::not(leaf("sz"))),
            )],
            tol(),
        );
        assert_eq!(v.reason, InferenceReason::IncompatibleFrameworks);
        assert_eq!(
            v.witness,
            Some(Witness::Incompatible(Incompatibility::NonCommuting {
                left: "sx".into(),
                right: "sz".into()
            }))
        );
    }

    #[test]
    fn separate_arguments_cannot_be_merged() {
        // Same assumption, two conclusions in mutually incompatible frameworks.
        let base = fw(vec![("one", ComplexMatrix::identity(2))]);
        let fx = fw(vec![("sx", sx_plus())]);
        let fz = fw(vec![("sz", sz_plus())]);
        let assume = [Description::new(base, leaf("one"))];
        let cx = Description::new(fx, Formula::or(leaf("sx"), Formula::not(leaf("sx"))));
        let cz = Description::new(fz, Formula::or(leaf("sz"), Formula::not(leaf("sz"))));
        assert!(infer_single_time(&assume, std::slice::from_ref(&cx), tol()).valid());
        assert!(infer_single_time(&assume, std::slice::from_ref(&cz), tol()).valid());
        assert_eq!(
            infer_single_time(&assume, &[cx, cz], tol()).reason,
            InferenceReason::IncompatibleFrameworks
        );
    }
}
