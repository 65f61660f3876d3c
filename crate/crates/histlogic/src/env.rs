//! Elaboration: turns a parsed model into spaces, operators, histories,
//! dynamics and checked queries.

use std::collections::HashMap;
use std::sync::Arc;

use histlogic_core::histories::{PropagatorSet, TimeGrid};
use histlogic_core::linalg::{complete_unitary, embed_operator, projector_onto_span, MAX_DIM};
use histlogic_core::models::NamedModel;
use histlogic_core::{
    ComplexMatrix, FamilySettings, Formula, History, HistoryFormula, HistoryLeaf, C64,
};
use indexmap::IndexMap;

use crate::dsl::ast::*;
use crate::dsl::format::{format_events, format_item};
use crate::dsl::{DslError, ErrorKind};

#[derive(Debug, Clone, PartialEq)]
pub struct Space {
    pub name: String,
    pub dim: usize,
    pub basis: Vec<String>,
}

/// Result of evaluating an expression. Factor lists are sorted indices
/// into the declared spaces.
#[derive(Debug, Clone)]
pub enum Value {
    Scalar(C64),
    Vector {
        factors: Vec<usize>,
        data: Vec<C64>,
    },
    Operator {
        factors: Vec<usize>,
        mat: ComplexMatrix,
    },
    /// A matrix not tied to any space, such as an operator on the
    /// multi-time tensor space.
    Raw(ComplexMatrix),
}

impl Value {
    fn kind(&self) -> &'static str {
        match self {
            Value::Scalar(_) => "scalar",
            Value::Vector { .. } => "state",
            Value::Operator { .. } => "operator",
            Value::Raw(_) => "matrix",
        }
    }
}

#[derive(Debug, Clone)]
pub enum QueryKind {
    Prob {
        target: HistoryFormula,
        given: HistoryFormula,
        family: String,
    },
    Weight {
        target: HistoryFormula,
        family: String,
    },
    Consistent {
        family: String,
    },
    Infer {
        assumptions: Vec<(String, HistoryFormula)>,
        conclusions: Vec<(String, HistoryFormula)>,
    },
    Compatible {
        families: Vec<String>,
    },
}

impl QueryKind {
    pub fn name(&self) -> &'static str {
        match self {
            QueryKind::Prob { .. } => "prob",
            QueryKind::Weight { .. } => "weight",
            QueryKind::Consistent { .. } => "consistent",
            QueryKind::Infer { .. } => "infer",
            QueryKind::Compatible { .. } => "compatible",
        }
    }

    fn accepts_word(&self, w: &str) -> bool {
        w == "error"
            || match self {
                QueryKind::Prob { .. } | QueryKind::Weight { .. } => false,
                QueryKind::Consistent { .. } => matches!(w, "consistent" | "inconsistent"),
                QueryKind::Compatible { .. } => matches!(w, "compatible" | "incompatible"),
                QueryKind::Infer { .. } => {
                    matches!(
                        w,
                        "proven"
                            | "not_entailed"
                            | "incompatible_frameworks"
                            | "contradictory_assumptions"
                    )
                }
            }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expectation {
    Value(f64),
    Word(String),
}

#[derive(Debug, Clone)]
pub struct ElabQuery {
    /// Canonical text of the query.
    pub text: String,
    pub span: Span,
    pub kind: QueryKind,
    pub expect: Option<Expectation>,
}

/// Everything a model file declares, ready for evaluation.
#[derive(Debug, Clone)]
pub struct Environment {
    pub spaces: Vec<Space>,
    pub settings: FamilySettings,
    values: HashMap<String, Value>,
    histories: HashMap<String, History>,
    times: Option<TimeGrid>,
    propagators: Option<Arc<PropagatorSet>>,
    /// Generators of each family, by generator name.
    pub families: IndexMap<String, IndexMap<String, History>>,
    pub queries: Vec<ElabQuery>,
    declarations: usize,
}

fn type_error(span: Span, msg: impl Into<String>) -> DslError {
    DslError::new(ErrorKind::Type, span, msg)
}

fn undeclared(span: Span, what: &str, name: &str) -> DslError {
    DslError::new(
        ErrorKind::UndeclaredName,
        span,
        format!("undeclared {what} `{name}`"),
    )
}

fn dim_error(span: Span, msg: impl Into<String>) -> DslError {
    DslError::new(ErrorKind::DimensionMismatch, span, msg)
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Maps each index of the sorted-factor layout to the index of the layout
/// whose factors appear in `order`.
fn permutation(order: &[usize], dims: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    let total: usize = order.iter().map(|&f| dims[f]).product();
    let map = (0..total)
        .map(|i| {
            let mut digit = HashMap::new();
            let mut rest = i;
            for &f in sorted.iter().rev() {
                digit.insert(f, rest % dims[f]);
                rest /= dims[f];
            }
            order.iter().fold(0, |acc, f| acc * dims[*f] + digit[f])
        })
        .collect();
    (sorted, map)
}

impl Environment {
    fn empty(settings: FamilySettings) -> Self {
        Self {
            spaces: Vec::new(),
            settings,
            values: HashMap::new(),
            histories: HashMap::new(),
            times: None,
            propagators: None,
            families: IndexMap::new(),
            queries: Vec::new(),
            declarations: 0,
        }
    }

    /// Elaborates a parsed model. Declarations are processed in order;
    /// queries are checked once every declaration is known.
    pub fn elaborate(model: &Model, settings: FamilySettings) -> Result<Self, DslError> {
        let mut env = Self::empty(settings);
        let mut hamiltonian: Option<(ComplexMatrix, Span)> = None;
        let mut steps: HashMap<usize, (ComplexMatrix, Span)> = HashMap::new();
        for item in &model.items {
            if !matches!(item, Item::Query { .. }) {
                env.declarations += 1;
            }
            match item {
                Item::Space {
                    name,
                    dim,
                    basis,
                    span,
                } => {
                    let id = env.spaces.len();
                    env.spaces.push(Space {
                        name: name.clone(),
                        dim: *dim,
                        basis: basis.clone(),
                    });
                    let total = env.full_dim();
                    if total > MAX_DIM {
                        return Err(dim_error(
                            *span,
                            format!("total dimension {total} exceeds {MAX_DIM}"),
                        ));
                    }
                    for (k, label) in basis.iter().enumerate() {
                        let mut data = vec![c(0.0); *dim];
                        data[k] = c(1.0);
                        env.values.insert(
                            label.clone(),
                            Value::Vector {
                                factors: vec![id],
                                data,
                            },
                        );
                    }
                }
                Item::State { name, expr, span } => {
                    let v = env.eval(expr, *span)?;
                    if !matches!(v, Value::Vector { .. }) {
                        return Err(type_error(
                            *span,
                            format!("`{name}` must be a state, found a {}", v.kind()),
                        ));
                    }
                    env.values.insert(name.clone(), v);
                }
                Item::Projector { name, expr, span } => {
                    let v = env.eval(expr, *span)?;
                    let Value::Operator { ref mat, .. } = v else {
                        return Err(type_error(
                            *span,
                            format!("`{name}` must be an operator, found a {}", v.kind()),
                        ));
                    };
                    if !mat.is_projector(settings.tol) {
                        return Err(type_error(*span, format!("`{name}` is not a projector")));
                    }
                    env.values.insert(name.clone(), v);
                }
                Item::Operator { name, expr, span } => {
                    let v = env.eval(expr, *span)?;
                    if !matches!(v, Value::Operator { .. } | Value::Raw(_)) {
                        return Err(type_error(
                            *span,
                            format!("`{name}` must be an operator, found a {}", v.kind()),
                        ));
                    }
                    env.values.insert(name.clone(), v);
                }
                Item::Times { entries, span } => {
                    let labeled: Vec<(String, f64)> = entries
                        .iter()
                        .enumerate()
                        .map(|(k, (label, t))| (label.clone(), t.unwrap_or(k as f64)))
                        .collect();
                    let grid =
                        TimeGrid::labeled(labeled).map_err(|e| type_error(*span, e.to_string()))?;
                    env.times = Some(grid);
                }
                Item::Hamiltonian { expr, span } => {
                    if hamiltonian.is_some() || !steps.is_empty() {
                        return Err(type_error(*span, "dynamics are already given"));
                    }
                    let h = env.full_operator(expr, *span)?;
                    if !h.is_hermitian(settings.tol) {
                        return Err(type_error(*span, "the Hamiltonian is not Hermitian"));
                    }
                    hamiltonian = Some((h, *span));
                }
                Item::Step {
                    from,
                    to,
                    expr,
                    span,
                } => {
                    if hamiltonian.is_some() {
                        return Err(type_error(
                            *span,
                            "dynamics are already given by a Hamiltonian",
                        ));
                    }
                    let grid = env.grid(*span)?;
                    let a = env.time_index(from, *span)?;
                    let b = env.time_index(to, *span)?;
                    if b != a + 1 {
                        let _ = grid;
                        return Err(type_error(
                            *span,
                            format!("`{from}` and `{to}` are not consecutive times"),
                        ));
                    }
                    let u = env.full_operator(expr, *span)?;
                    if !u.is_unitary(settings.tol) {
                        return Err(type_error(
                            *span,
                            format!("step {from} -> {to} is not unitary"),
                        ));
                    }
                    if steps.insert(a, (u, *span)).is_some() {
                        return Err(DslError::new(
                            ErrorKind::DuplicateName,
                            *span,
                            format!("step {from} -> {to} is given twice"),
                        ));
                    }
                }
                Item::History { name, body, span } => {
                    let h = match body {
                        HistoryBody::Events(events) => env.simple_history(events, *span)?,
                        HistoryBody::Generalized(expr) => env.generalized_history(expr, *span)?,
                    };
                    env.histories.insert(name.clone(), h);
                }
                Item::Family {
                    name,
                    members,
                    span,
                } => {
                    let mut gens = IndexMap::new();
                    for m in members {
                        match m {
                            FamilyMember::Name(n, mspan) => {
                                if let Some(h) = env.histories.get(n) {
                                    gens.insert(n.clone(), h.clone());
                                } else if let Some(other) = env.families.get(n) {
                                    gens.extend(other.iter().map(|(k, v)| (k.clone(), v.clone())));
                                } else {
                                    return Err(undeclared(*mspan, "history or family", n));
                                }
                            }
                            FamilyMember::Events(events, mspan) => {
                                gens.insert(
                                    format_events(events),
                                    env.simple_history(events, *mspan)?,
                                );
                            }
                        }
                    }
                    if gens.is_empty() {
                        return Err(type_error(
                            *span,
                            format!("family `{name}` has no generators"),
                        ));
                    }
                    env.families.insert(name.clone(), gens);
                }
                Item::Query { .. } => {}
            }
        }
        if let Some(grid) = env.times.clone() {
            let dim = env.full_dim();
            let props = if let Some((h, span)) = hamiltonian {
                PropagatorSet::from_hamiltonian(&h, grid, settings.tol)
                    .map_err(|e| type_error(span, e.to_string()))?
            } else {
                let steps = (0..grid.len().saturating_sub(1))
                    .map(|k| {
                        steps
                            .remove(&k)
                            .map(|s| s.0)
                            .unwrap_or_else(|| ComplexMatrix::identity(dim))
                    })
                    .collect();
                PropagatorSet::explicit(dim, grid, steps, settings.tol)
                    .map_err(|e| type_error(Span::default(), e.to_string()))?
            };
            env.propagators = Some(Arc::new(props));
        } else if let Some((_, span)) = hamiltonian {
            return Err(type_error(span, "dynamics need a `times` declaration"));
        }
        for item in &model.items {
            if let Item::Query { .. } = item {
                let q = env.elaborate_query(item)?;
                env.queries.push(q);
            }
        }
        Ok(env)
    }

    /// An environment exposing a built-in model: a single space `H`, the
    /// model's symbols and operators, its time labels and its families.
    pub fn from_model(model: &NamedModel, settings: FamilySettings) -> Self {
        let mut env = Self::empty(settings);
        env.spaces.push(Space {
            name: "H".into(),
            dim: model.dim(),
            basis: Vec::new(),
        });
        let identifier = |name: &str| {
            crate::dsl::lexer::tokenize(name)
                .map(|t| {
                    t.len() == 3
                        && matches!(&t[0].tok, crate::dsl::lexer::Tok::Ident(s) if s == name)
                })
                .unwrap_or(false)
                && !RESERVED.contains(&name)
        };
        for (name, p) in model.symbols.iter().chain(&model.operators) {
            if identifier(name) {
                env.values.insert(
                    name.clone(),
                    Value::Operator {
                        factors: vec![0],
                        mat: p.clone(),
                    },
                );
            }
        }
        env.times = Some(model.grid().clone());
        env.propagators = Some(model.propagators.clone());
        for (name, fam) in &model.families {
            env.families.insert(name.clone(), fam.generators().clone());
        }
        env
    }

    pub fn declaration_count(&self) -> usize {
        self.declarations
    }

    pub fn propagators(&self) -> Option<&Arc<PropagatorSet>> {
        self.propagators.as_ref()
    }

    pub fn full_dim(&self) -> usize {
        self.spaces.iter().map(|s| s.dim).product()
    }

    fn dims(&self) -> Vec<usize> {
        self.spaces.iter().map(|s| s.dim).collect()
    }

    fn all_factors(&self) -> Vec<usize> {
        (0..self.spaces.len()).collect()
    }

    fn factor_dim(&self, factors: &[usize]) -> usize {
        factors.iter().map(|&f| self.spaces[f].dim).product()
    }

    fn grid(&self, span: Span) -> Result<&TimeGrid, DslError> {
        self.times
            .as_ref()
            .ok_or_else(|| type_error(span, "no `times` declared"))
    }

    fn time_index(&self, label: &str, span: Span) -> Result<usize, DslError> {
        self.grid(span)?
            .index_of_label(label)
            .map_err(|_| undeclared(span, "time", label))
    }

    fn space_id(&self, name: &str, span: Span) -> Result<usize, DslError> {
        self.spaces
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| undeclared(span, "space", name))
    }

    /// Evaluates `expr` to an operator on the whole single-time space.
    fn full_operator(&self, expr: &Expr, span: Span) -> Result<ComplexMatrix, DslError> {
        match self.eval(expr, span)? {
            Value::Operator { factors, mat } => {
                self.embed(&mat, &factors, &self.all_factors(), span)
            }
            Value::Scalar(z) if !self.spaces.is_empty() => {
                Ok(ComplexMatrix::identity(self.full_dim()).scale(z))
            }
            v => Err(type_error(
                span,
                format!("expected an operator, found a {}", v.kind()),
            )),
        }
    }

    fn embed(
        &self,
        op: &ComplexMatrix,
        from: &[usize],
        to: &[usize],
        span: Span,
    ) -> Result<ComplexMatrix, DslError> {
        if from == to {
            return Ok(op.clone());
        }
        let dims: Vec<usize> = to.iter().map(|&f| self.spaces[f].dim).collect();
        let positions: Vec<usize> = from
            .iter()
            .map(|f| to.iter().position(|g| g == f).unwrap())
            .collect();
        embed_operator(op, &dims, &positions).map_err(|e| dim_error(span, e.to_string()))
    }

    fn projector_on_full(&self, expr: &Expr, span: Span) -> Result<ComplexMatrix, DslError> {
        let p = self.full_operator(expr, span)?;
        if !p.is_projector(self.settings.tol) {
            return Err(type_error(span, "history events must be projectors"));
        }
        Ok(p)
    }

    fn simple_history(&self, events: &Events, span: Span) -> Result<History, DslError> {
        let n = self.grid(span)?.len();
        let mut indexed = Vec::new();
        let mut seen = Vec::new();
        for (expr, label) in events {
            let k = self.time_index(label, span)?;
            if seen.contains(&k) {
                return Err(type_error(span, format!("two events at time `{label}`")));
            }
            seen.push(k);
            indexed.push((k, self.projector_on_full(expr, span)?));
        }
        History::from_events(self.full_dim(), n, &indexed)
            .map_err(|e| type_error(span, e.to_string()))
    }

    fn generalized_history(&self, expr: &Expr, span: Span) -> Result<History, DslError> {
        let n = self.grid(span)?.len();
        let mat = match self.eval(expr, span)? {
            Value::Raw(m) => m,
            Value::Operator { factors, mat } if n == 1 => {
                self.embed(&mat, &factors, &self.all_factors(), span)?
            }
            v => {
                return Err(type_error(
                    span,
                    format!(
                        "expected an operator on the history space, found a {}",
                        v.kind()
                    ),
                ))
            }
        };
        let expected = self.full_dim().checked_pow(n as u32).unwrap_or(usize::MAX);
        if mat.dim() != expected {
            return Err(dim_error(
                span,
                format!(
                    "history operator has dimension {}, expected {expected}",
                    mat.dim()
                ),
            ));
        }
        if !mat.is_projector(self.settings.tol) {
            return Err(type_error(span, "history operator is not a projector"));
        }
        Ok(History::Generalized(mat))
    }

    /// Factors for a square matrix of side `n` with no `on` clause: the
    /// whole space, else the unique space of that dimension.
    fn factors_for_dim(&self, n: usize, span: Span) -> Result<Option<Vec<usize>>, DslError> {
        if !self.spaces.is_empty() && n == self.full_dim() {
            return Ok(Some(self.all_factors()));
        }
        let matching: Vec<usize> = (0..self.spaces.len())
            .filter(|&f| self.spaces[f].dim == n)
            .collect();
        match matching.len() {
            0 => Ok(None),
            1 => Ok(Some(matching)),
            _ => Err(dim_error(
                span,
                format!("several spaces have dimension {n}; add `on <space>`"),
            )),
        }
    }

    fn place_matrix(
        &self,
        mat: ComplexMatrix,
        on: &[String],
        span: Span,
    ) -> Result<Value, DslError> {
        if on.is_empty() {
            return Ok(match self.factors_for_dim(mat.dim(), span)? {
                Some(factors) => Value::Operator { factors, mat },
                None => Value::Raw(mat),
            });
        }
        let order = on
            .iter()
            .map(|s| self.space_id(s, span))
            .collect::<Result<Vec<_>, _>>()?;
        let mut check = order.clone();
        check.sort_unstable();
        check.dedup();
        if check.len() != order.len() {
            return Err(type_error(span, "a space is listed twice"));
        }
        if self.factor_dim(&order) != mat.dim() {
            return Err(dim_error(
                span,
                format!(
                    "matrix of side {} on spaces of dimension {}",
                    mat.dim(),
                    self.factor_dim(&order)
                ),
            ));
        }
        Ok(self.permuted_operator(&order, mat))
    }

    fn permuted_operator(&self, order: &[usize], mat: ComplexMatrix) -> Value {
        let (factors, map) = permutation(order, &self.dims());
        let mat = if factors == order {
            mat
        } else {
            ComplexMatrix::from_fn(mat.dim(), |i, j| mat.get(map[i], map[j]))
        };
        Value::Operator { factors, mat }
    }

    fn permuted_vector(&self, order: &[usize], data: Vec<C64>) -> Value {
        let (factors, map) = permutation(order, &self.dims());
        let data = if factors == order {
            data
        } else {
            map.iter().map(|&k| data[k]).collect()
        };
        Value::Vector { factors, data }
    }

    fn union(a: &[usize], b: &[usize]) -> Vec<usize> {
        let mut u: Vec<usize> = a.iter().chain(b).copied().collect();
        u.sort_unstable();
        u.dedup();
        u
    }

    fn disjoint(a: &[usize], b: &[usize]) -> bool {
        a.iter().all(|f| !b.contains(f))
    }

    fn check_size(&self, factors: &[usize], span: Span) -> Result<(), DslError> {
        let d = self.factor_dim(factors);
        if d > MAX_DIM {
            return Err(dim_error(span, format!("dimension {d} exceeds {MAX_DIM}")));
        }
        Ok(())
    }

    fn tensor2(&self, a: Value, b: Value, span: Span) -> Result<Value, DslError> {
        match (a, b) {
            (
                Value::Vector {
                    factors: fa,
                    data: da,
                },
                Value::Vector {
                    factors: fb,
                    data: db,
                },
            ) if Self::disjoint(&fa, &fb) => {
                let order: Vec<usize> = fa.iter().chain(&fb).copied().collect();
                self.check_size(&order, span)?;
                Ok(self.permuted_vector(&order, histlogic_core::linalg::tensor_vectors(&da, &db)))
            }
            (
                Value::Operator {
                    factors: fa,
                    mat: ma,
                },
                Value::Operator {
                    factors: fb,
                    mat: mb,
                },
            ) if Self::disjoint(&fa, &fb) => {
                let order: Vec<usize> = fa.iter().chain(&fb).copied().collect();
                self.check_size(&order, span)?;
                let mat = ma.tensor(&mb).map_err(|e| dim_error(span, e.to_string()))?;
                Ok(self.permuted_operator(&order, mat))
            }
            // Operators on the whole space (or raw matrices) tensor into
            // operators on the multi-time space.
            (a, b) => {
                let raw = |v: Value| -> Result<ComplexMatrix, DslError> {
                    match v {
                        Value::Raw(m) => Ok(m),
                        Value::Operator { factors, mat } => {
                            self.embed(&mat, &factors, &self.all_factors(), span)
                        }
                        v => Err(type_error(
                            span,
                            format!("cannot tensor a {} here", v.kind()),
                        )),
                    }
                };
                let (ma, mb) = (raw(a)?, raw(b)?);
                if ma.dim() * mb.dim() > MAX_DIM {
                    return Err(dim_error(
                        span,
                        format!("dimension {} exceeds {MAX_DIM}", ma.dim() * mb.dim()),
                    ));
                }
                Ok(Value::Raw(
                    ma.tensor(&mb).map_err(|e| dim_error(span, e.to_string()))?,
                ))
            }
        }
    }

    fn add(&self, a: Value, b: Value, span: Span) -> Result<Value, DslError> {
        Ok(match (a, b) {
            (Value::Scalar(x), Value::Scalar(y)) => Value::Scalar(x + y),
            (
                Value::Vector {
                    factors: fa,
                    data: da,
                },
                Value::Vector {
                    factors: fb,
                    data: db,
                },
            ) => {
                if fa != fb {
                    return Err(type_error(span, "cannot add states on different spaces"));
                }
                Value::Vector {
                    factors: fa,
                    data: da.iter().zip(&db).map(|(x, y)| x + y).collect(),
                }
            }
            (
                Value::Operator {
                    factors: fa,
                    mat: ma,
                },
                Value::Operator {
                    factors: fb,
                    mat: mb,
                },
            ) => {
                let u = Self::union(&fa, &fb);
                self.check_size(&u, span)?;
                let (ea, eb) = (
                    self.embed(&ma, &fa, &u, span)?,
                    self.embed(&mb, &fb, &u, span)?,
                );
                Value::Operator {
                    factors: u,
                    mat: &ea + &eb,
                }
            }
            (Value::Scalar(z), Value::Operator { factors, mat })
            | (Value::Operator { factors, mat }, Value::Scalar(z)) => {
                let shift = ComplexMatrix::identity(mat.dim()).scale(z);
                Value::Operator {
                    factors,
                    mat: &mat + &shift,
                }
            }
            (Value::Raw(ma), Value::Raw(mb)) if ma.dim() == mb.dim() => Value::Raw(&ma + &mb),
            (Value::Scalar(z), Value::Raw(m)) | (Value::Raw(m), Value::Scalar(z)) => {
                Value::Raw(&m + &ComplexMatrix::identity(m.dim()).scale(z))
            }
            (a, b) => {
                return Err(type_error(
                    span,
                    format!("cannot add a {} and a {}", a.kind(), b.kind()),
                ))
            }
        })
    }

    fn scale(v: Value, z: C64) -> Value {
        match v {
            Value::Scalar(x) => Value::Scalar(x * z),
            Value::Vector { factors, data } => Value::Vector {
                factors,
                data: data.iter().map(|x| x * z).collect(),
            },
            Value::Operator { factors, mat } => Value::Operator {
                factors,
                mat: mat.scale(z),
            },
            Value::Raw(m) => Value::Raw(m.scale(z)),
        }
    }

    fn mul(&self, a: Value, b: Value, span: Span) -> Result<Value, DslError> {
        match (a, b) {
            (Value::Scalar(z), v) | (v, Value::Scalar(z)) => Ok(Self::scale(v, z)),
            (
                Value::Operator {
                    factors: fa,
                    mat: ma,
                },
                Value::Operator {
                    factors: fb,
                    mat: mb,
                },
            ) => {
                let u = Self::union(&fa, &fb);
                self.check_size(&u, span)?;
                let (ea, eb) = (
                    self.embed(&ma, &fa, &u, span)?,
                    self.embed(&mb, &fb, &u, span)?,
                );
                Ok(Value::Operator {
                    factors: u,
                    mat: &ea * &eb,
                })
            }
            (Value::Operator { factors: fo, mat }, Value::Vector { factors: fv, data }) => {
                if !fo.iter().all(|f| fv.contains(f)) {
                    return Err(type_error(
                        span,
                        "operator acts on spaces the state does not have",
                    ));
                }
                let op = self.embed(&mat, &fo, &fv, span)?;
                Ok(Value::Vector {
                    factors: fv,
                    data: op.apply(&data),
                })
            }
            (a @ Value::Vector { .. }, b @ Value::Vector { .. }) => {
                let overlap = matches!((&a, &b), (Value::Vector { factors: fa, .. }, Value::Vector { factors: fb, .. }) if !Self::disjoint(fa, fb));
                if overlap {
                    return Err(type_error(
                        span,
                        "states on the same space cannot be multiplied; use `ket` or `span`",
                    ));
                }
                self.tensor2(a, b, span)
            }
            (Value::Raw(ma), Value::Raw(mb)) if ma.dim() == mb.dim() => Ok(Value::Raw(&ma * &mb)),
            (a, b) => Err(type_error(
                span,
                format!("cannot multiply a {} by a {}", a.kind(), b.kind()),
            )),
        }
    }

    fn scalar(&self, expr: &Expr, span: Span) -> Result<C64, DslError> {
        match self.eval(expr, span)? {
            Value::Scalar(z) => Ok(z),
            v => Err(type_error(
                span,
                format!("expected a number, found a {}", v.kind()),
            )),
        }
    }

    fn vector(&self, expr: &Expr, span: Span) -> Result<(Vec<usize>, Vec<C64>), DslError> {
        match self.eval(expr, span)? {
            Value::Vector { factors, data } => Ok((factors, data)),
            v => Err(type_error(
                span,
                format!("expected a state, found a {}", v.kind()),
            )),
        }
    }

    fn vectors(&self, exprs: &[Expr], span: Span) -> Result<(Vec<usize>, Vec<Vec<C64>>), DslError> {
        let mut factors = None;
        let mut out = Vec::new();
        for e in exprs {
            let (f, v) = self.vector(e, span)?;
            if factors.get_or_insert_with(|| f.clone()) != &f {
                return Err(type_error(span, "states live on different spaces"));
            }
            out.push(v);
        }
        Ok((factors.unwrap_or_default(), out))
    }

    pub fn eval(&self, expr: &Expr, span: Span) -> Result<Value, DslError> {
        Ok(match expr {
            Expr::Real(x) => Value::Scalar(c(*x)),
            Expr::Imag(x) => Value::Scalar(C64::new(0.0, *x)),
            Expr::Name(name, nspan) => {
                let span = if nspan.line > 0 { *nspan } else { span };
                match self.values.get(name) {
                    Some(v) => v.clone(),
                    None if self.spaces.iter().any(|s| &s.name == name) => {
                        return Err(type_error(span, format!("space `{name}` used as a value")))
                    }
                    None => return Err(undeclared(span, "name", name)),
                }
            }
            Expr::Neg(x) => Self::scale(self.eval(x, span)?, c(-1.0)),
            Expr::Not(x) => match self.eval(x, span)? {
                Value::Operator { factors, mat } => Value::Operator {
                    factors,
                    mat: mat.complement(),
                },
                Value::Raw(m) => Value::Raw(m.complement()),
                v => {
                    return Err(type_error(
                        span,
                        format!("`not` needs a projector, found a {}", v.kind()),
                    ))
                }
            },
            Expr::Bin(op, a, b) => {
                let (a, b) = (self.eval(a, span)?, self.eval(b, span)?);
                match op {
                    BinOp::Add => self.add(a, b, span)?,
                    BinOp::Sub => self.add(a, Self::scale(b, c(-1.0)), span)?,
                    BinOp::Mul => self.mul(a, b, span)?,
                    BinOp::Div => match b {
                        Value::Scalar(z) if z.norm() > 0.0 => Self::scale(a, z.inv()),
                        Value::Scalar(_) => return Err(type_error(span, "division by zero")),
                        b => {
                            return Err(type_error(
                                span,
                                format!("cannot divide by a {}", b.kind()),
                            ))
                        }
                    },
                }
            }
            Expr::Sqrt(x) => Value::Scalar(self.scalar(x, span)?.sqrt()),
            Expr::Ket(x) => {
                let (factors, v) = self.vector(x, span)?;
                let mat = projector_onto_span(&[v], self.settings.tol)
                    .map_err(|e| type_error(span, e.to_string()))?;
                Value::Operator { factors, mat }
            }
            Expr::SpanOf(xs, sspan) => {
                let (factors, vs) = self.vectors(xs, *sspan)?;
                let mat = projector_onto_span(&vs, self.settings.tol)
                    .map_err(|e| type_error(*sspan, e.to_string()))?;
                Value::Operator { factors, mat }
            }
            Expr::Diag(entries, on, dspan) => {
                let d: Vec<C64> = entries.iter().map(|x| c(*x)).collect();
                let on: Vec<String> = on.iter().cloned().collect();
                self.place_matrix(ComplexMatrix::diagonal(&d), &on, *dspan)?
            }
            Expr::Matrix(rows, on, mspan) => {
                let rows = rows
                    .iter()
                    .map(|r| {
                        r.iter()
                            .map(|e| self.scalar(e, *mspan))
                            .collect::<Result<Vec<_>, _>>()
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let mat = ComplexMatrix::from_rows(&rows)
                    .map_err(|e| dim_error(*mspan, e.to_string()))?;
                self.place_matrix(mat, on, *mspan)?
            }
            Expr::Tensor(parts, tspan) => {
                let mut acc = self.eval(&parts[0], *tspan)?;
                for p in &parts[1..] {
                    acc = self.tensor2(acc, self.eval(p, *tspan)?, *tspan)?;
                }
                acc
            }
            Expr::Map(pairs, mspan) => {
                let inputs: Vec<Expr> = pairs.iter().map(|p| p.0.clone()).collect();
                let outputs: Vec<Expr> = pairs.iter().map(|p| p.1.clone()).collect();
                let (fi, vi) = self.vectors(&inputs, *mspan)?;
                let (fo, vo) = self.vectors(&outputs, *mspan)?;
                if fi != fo {
                    return Err(type_error(
                        *mspan,
                        "`map` must send states to states on the same spaces",
                    ));
                }
                let mat = complete_unitary(&vi, &vo, self.settings.tol).map_err(|e| {
                    type_error(
                        *mspan,
                        format!("`map` needs orthonormal inputs and outputs: {e}"),
                    )
                })?;
                Value::Operator { factors: fi, mat }
            }
            Expr::Identity(on, ispan) => {
                if self.spaces.is_empty() {
                    return Err(type_error(*ispan, "no space declared"));
                }
                let mut factors = if on.is_empty() {
                    self.all_factors()
                } else {
                    on.iter()
                        .map(|s| self.space_id(s, *ispan))
                        .collect::<Result<Vec<_>, _>>()?
                };
                factors.sort_unstable();
                factors.dedup();
                Value::Operator {
                    mat: ComplexMatrix::identity(self.factor_dim(&factors)),
                    factors,
                }
            }
        })
    }

    fn family_name(&self, name: &str, span: Span) -> Result<String, DslError> {
        if self.families.contains_key(name) {
            Ok(name.to_owned())
        } else {
            Err(undeclared(span, "family", name))
        }
    }

    /// A statement about histories in `family`. Names of the family's
    /// generators stay symbolic; other histories are decomposed later.
    fn formula(&self, h: &HExpr, family: &str) -> Result<HistoryFormula, DslError> {
        Ok(match h {
            HExpr::Name(n, nspan) => {
                if self.families[family].contains_key(n) {
                    Formula::leaf(HistoryLeaf::Generator(n.clone()))
                } else if let Some(h) = self.histories.get(n) {
                    Formula::leaf(HistoryLeaf::History(h.clone()))
                } else {
                    return Err(undeclared(*nspan, "history", n));
                }
            }
            HExpr::Events(events, espan) => {
                let name = format_events(events);
                if self.families[family].contains_key(&name) {
                    Formula::leaf(HistoryLeaf::Generator(name))
                } else {
                    Formula::leaf(HistoryLeaf::History(self.simple_history(events, *espan)?))
                }
            }
            HExpr::Not(x) => Formula::not(self.formula(x, family)?),
            HExpr::And(a, b) => Formula::and(self.formula(a, family)?, self.formula(b, family)?),
            HExpr::Or(a, b) => Formula::or(self.formula(a, family)?, self.formula(b, family)?),
        })
    }

    /// Checks a query item against the declarations.
    pub fn elaborate_query(&self, item: &Item) -> Result<ElabQuery, DslError> {
        let Item::Query {
            query,
            expect,
            span,
        } = item
        else {
            return Err(type_error(item.span(), "expected a query"));
        };
        let span = *span;
        let pairs = |ps: &[(String, HExpr)]| -> Result<Vec<(String, HistoryFormula)>, DslError> {
            ps.iter()
                .map(|(f, h)| {
                    let f = self.family_name(f, span)?;
                    Ok((f.clone(), self.formula(h, &f)?))
                })
                .collect()
        };
        let kind = match query {
            Query::Prob {
                target,
                given,
                family,
            } => {
                let family = self.family_name(family, span)?;
                QueryKind::Prob {
                    target: self.formula(target, &family)?,
                    given: self.formula(given, &family)?,
                    family,
                }
            }
            Query::Weight { target, family } => {
                let family = self.family_name(family, span)?;
                QueryKind::Weight {
                    target: self.formula(target, &family)?,
                    family,
                }
            }
            Query::Consistent { family } => QueryKind::Consistent {
                family: self.family_name(family, span)?,
            },
            Query::Infer {
                assumptions,
                conclusions,
            } => QueryKind::Infer {
                assumptions: pairs(assumptions)?,
                conclusions: pairs(conclusions)?,
            },
            Query::Compatible { families } => {
                if families.is_empty() {
                    return Err(type_error(span, "`compatible` needs at least one family"));
                }
                QueryKind::Compatible {
                    families: families
                        .iter()
                        .map(|f| self.family_name(f, span))
                        .collect::<Result<_, _>>()?,
                }
            }
        };
        let expect = match expect {
            None => None,
            Some(Expect::Word(w)) => {
                if !kind.accepts_word(w) {
                    return Err(type_error(
                        span,
                        format!("`expect {w}` does not fit a `{}` query", kind.name()),
                    ));
                }
                Some(Expectation::Word(w.clone()))
            }
            Some(Expect::Value(e)) => {
                if !matches!(kind, QueryKind::Prob { .. } | QueryKind::Weight { .. }) {
                    return Err(type_error(
                        span,
                        format!("a `{}` query expects a verdict word", kind.name()),
                    ));
                }
                let z = self.scalar(e, span)?;
                if z.im.abs() > self.settings.tol.eps {
                    return Err(type_error(span, "expected value must be real"));
                }
                Some(Expectation::Value(z.re))
            }
        };
        Ok(ElabQuery {
            text: format_item(item),
            span,
            kind,
            expect,
        })
    }
}
