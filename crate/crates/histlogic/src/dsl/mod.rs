//! The model-file language: tokens, syntax tree, parser and formatter.

pub mod ast;
pub mod format;
pub mod lexer;
pub mod parser;

use std::fmt;

pub use ast::{Expr, HExpr, Item, Model, Query, Span};
pub use format::format_model;
pub use parser::{parse_model, parse_query, parse_syntax};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Syntax,
    UndeclaredName,
    DuplicateName,
    DimensionMismatch,
    Type,
    Engine,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorKind::Syntax => "syntax error",
            ErrorKind::UndeclaredName => "undeclared name",
            ErrorKind::DuplicateName => "duplicate name",
            ErrorKind::DimensionMismatch => "dimension mismatch",
            ErrorKind::Type => "type error",
            ErrorKind::Engine => "error",
        })
    }
}

/// A diagnostic with its source location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DslError {
    pub kind: ErrorKind,
    pub span: Span,
    pub message: String,
}

impl DslError {
    pub fn new(kind: ErrorKind, span: Span, message: impl Into<String>) -> Self {
        Self {
            kind,
            span,
            message: message.into(),
        }
    }

    pub fn syntax(span: Span, message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Syntax, span, message)
    }
}

impl fmt::Display for DslError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}: {}: {}",
            self.span.line, self.span.col, self.kind, self.message
        )
    }
}

impl std::error::Error for DslError {}
