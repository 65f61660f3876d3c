//! Syntax tree of a model file.

use std::fmt;

/// Source position (1-based). Spans never affect equality, so trees parsed
/// from differently formatted text compare equal.
#[derive(Debug, Clone, Copy, Default, Eq)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub items: Vec<Item>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Space {
        name: String,
        dim: usize,
        basis: Vec<String>,
        span: Span,
    },
    State {
        name: String,
        expr: Expr,
        span: Span,
    },
    Projector {
        name: String,
        expr: Expr,
        span: Span,
    },
    Operator {
        name: String,
        expr: Expr,
        span: Span,
    },
    /// Labels with optional numeric times; missing times default to the
    /// label's position.
    Times {
        entries: Vec<(String, Option<f64>)>,
        span: Span,
    },
    Hamiltonian {
        expr: Expr,
        span: Span,
    },
    Step {
        from: String,
        to: String,
        expr: Expr,
        span: Span,
    },
    History {
        name: String,
        body: HistoryBody,
        span: Span,
    },
    Family {
        name: String,
        members: Vec<FamilyMember>,
        span: Span,
    },
    Query {
        query: Query,
        expect: Option<Expect>,
        span: Span,
    },
}

impl Item {
    pub fn span(&self) -> Span {
        match self {
            Item::Space { span, .. }
            | Item::State { span, .. }
            | Item::Projector { span, .. }
            | Item::Operator { span, .. }
            | Item::Times { span, .. }
            | Item::Hamiltonian { span, .. }
            | Item::Step { span, .. }
            | Item::History { span, .. }
            | Item::Family { span, .. }
            | Item::Query { span, .. } => *span,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Real(f64),
    /// Imaginary literal such as `2i`; `i` alone is `Imag(1.0)`.
    Imag(f64),
    Name(String, Span),
    Neg(Box<Expr>),
    Not(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Sqrt(Box<Expr>),
    Ket(Box<Expr>),
    SpanOf(Vec<Expr>, Span),
    Diag(Vec<f64>, Option<String>, Span),
    Tensor(Vec<Expr>, Span),
    Matrix(Vec<Vec<Expr>>, Vec<String>, Span),
    Map(Vec<(Expr, Expr)>, Span),
    Identity(Vec<String>, Span),
}

/// `projector @ time` pairs.
pub type Events = Vec<(Expr, String)>;

#[derive(Debug, Clone, PartialEq)]
pub enum HistoryBody {
    Events(Events),
    /// Any projector on the n-fold tensor space.
    Generalized(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FamilyMember {
    /// A declared history or another family.
    Name(String, Span),
    Events(Events, Span),
}

#[derive(Debug, Clone, PartialEq)]
pub enum HExpr {
    Name(String, Span),
    Events(Events, Span),
    Not(Box<HExpr>),
    And(Box<HExpr>, Box<HExpr>),
    Or(Box<HExpr>, Box<HExpr>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Query {
    Prob {
        target: HExpr,
        given: HExpr,
        family: String,
    },
    Weight {
        target: HExpr,
        family: String,
    },
    Consistent {
        family: String,
    },
    Infer {
        assumptions: Vec<(String, HExpr)>,
        conclusions: Vec<(String, HExpr)>,
    },
    Compatible {
        families: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expect {
    Value(Expr),
    Word(String),
}

/// Words accepted after `expect`.
pub const EXPECT_WORDS: &[&str] = &[
    "consistent",
    "inconsistent",
    "compatible",
    "incompatible",
    "proven",
    "not_entailed",
    "incompatible_frameworks",
    "contradictory_assumptions",
    "error",
];

/// Names that cannot be declared.
pub const RESERVED: &[&str] = &[
    "space",
    "dim",
    "basis",
    "state",
    "projector",
    "operator",
    "times",
    "hamiltonian",
    "step",
    "history",
    "family",
    "query",
    "prob",
    "weight",
    "given",
    "in",
    "consistent",
    "infer",
    "compatible",
    "expect",
    "not",
    "ket",
    "span",
    "diag",
    "tensor",
    "matrix",
    "map",
    "on",
    "sqrt",
    "sqrt2",
    "i",
    "I",
];
