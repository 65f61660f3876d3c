//! Recursive-descent parser for model files.

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::{DslError, ErrorKind};

pub fn parse_model(text: &str) -> Result<Model, DslError> {
    let model = parse_syntax(text)?;
    check_names(&model.items)?;
    Ok(model)
}

/// Parses without checking that declared names are unique.
pub fn parse_syntax(text: &str) -> Result<Model, DslError> {
    let mut p = Parser {
        tokens: tokenize(text)?,
        pos: 0,
    };
    let mut items = Vec::new();
    loop {
        p.skip_newlines();
        if p.at_eof() {
            break;
        }
        items.push(p.item()?);
        p.end_of_statement()?;
    }
    Ok(Model { items })
}

/// Parses a single query, with or without the leading `query` keyword.
pub fn parse_query(text: &str) -> Result<Item, DslError> {
    let mut p = Parser {
        tokens: tokenize(text)?,
        pos: 0,
    };
    p.skip_newlines();
    let span = p.span();
    if p.peek_ident() == Some("query") {
        p.pos += 1;
    }
    let item = p.query(span)?;
    p.end_of_statement()?;
    p.skip_newlines();
    if !p.at_eof() {
        return Err(DslError::syntax(p.span(), "expected a single query"));
    }
    Ok(item)
}

/// Declared names must be unique and not reserved.
fn check_names(items: &[Item]) -> Result<(), DslError> {
    let mut seen = std::collections::HashSet::new();
    let mut declare = |name: &str, span: Span| -> Result<(), DslError> {
        if RESERVED.contains(&name) {
            return Err(DslError::syntax(
                span,
                format!("`{name}` is a reserved word"),
            ));
        }
        if !seen.insert(name.to_owned()) {
            return Err(DslError::new(
                ErrorKind::DuplicateName,
                span,
                format!("`{name}` is already declared"),
            ));
        }
        Ok(())
    };
    let mut times_seen = false;
    for item in items {
        match item {
            Item::Space {
                name, basis, span, ..
            } => {
                declare(name, *span)?;
                for b in basis {
                    declare(b, *span)?;
                }
            }
            Item::State { name, span, .. }
            | Item::Projector { name, span, .. }
            | Item::Operator { name, span, .. }
            | Item::History { name, span, .. }
            | Item::Family { name, span, .. } => declare(name, *span)?,
            Item::Times { entries, span } => {
                if times_seen {
                    return Err(DslError::new(
                        ErrorKind::DuplicateName,
                        *span,
                        "only one `times` declaration is allowed",
                    ));
                }
                times_seen = true;
                for (label, _) in entries {
                    declare(label, *span)?;
                }
            }
            _ => {}
        }
    }
    Ok(())
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn span(&self) -> Span {
        self.tokens[self.pos].span
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    fn skip_newlines(&mut self) {
        while matches!(self.peek(), Tok::Newline) {
            self.pos += 1;
        }
    }

    fn peek_ident(&self) -> Option<&str> {
        match self.peek() {
            Tok::Ident(s) => Some(s),
            _ => None,
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn describe(tok: &Tok) -> String {
        match tok {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number(x) | Tok::Imag(x) => format!("number {x}"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Newline => "end of line".into(),
            Tok::Eof => "end of file".into(),
        }
    }

    fn error<T>(&self, expected: &str) -> Result<T, DslError> {
        Err(DslError::syntax(
            self.span(),
            format!("expected {expected}, found {}", Self::describe(self.peek())),
        ))
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), DslError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.error(&format!("`{s}`"))
        }
    }

    fn expect_keyword(&mut self, k: &str) -> Result<(), DslError> {
        if self.peek_ident() == Some(k) {
            self.pos += 1;
            Ok(())
        } else {
            self.error(&format!("`{k}`"))
        }
    }

    fn name(&mut self) -> Result<String, DslError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.pos += 1;
                Ok(s)
            }
            _ => self.error("a name"),
        }
    }

    fn number(&mut self) -> Result<f64, DslError> {
        let negative = self.eat_sym("-");
        match self.peek().clone() {
            Tok::Number(x) => {
                self.pos += 1;
                Ok(if negative { -x } else { x })
            }
            _ => self.error("a number"),
        }
    }

    fn end_of_statement(&mut self) -> Result<(), DslError> {
        match self.peek() {
            Tok::Newline => {
                self.pos += 1;
                Ok(())
            }
            Tok::Eof => Ok(()),
            _ => self.error("end of line"),
        }
    }

    fn item(&mut self) -> Result<Item, DslError> {
        let span = self.span();
        let Some(keyword) = self.peek_ident().map(str::to_owned) else {
            return self.error("a declaration or query");
        };
        match keyword.as_str() {
            "space" => {
                self.pos += 1;
                let name = self.name()?;
                self.expect_keyword("dim")?;
                let dim = match self.peek().clone() {
                    Tok::Number(x) if x >= 1.0 && x.fract() == 0.0 && x <= 1e6 => {
                        self.pos += 1;
                        x as usize
                    }
                    _ => return self.error("a positive integer dimension"),
                };
                let mut basis = Vec::new();
                if self.peek_ident() == Some("basis") {
                    self.pos += 1;
                    while let Some(Tok::Ident(s)) = Some(self.peek().clone()) {
                        self.pos += 1;
                        basis.push(s);
                    }
                    if basis.len() != dim {
                        return Err(DslError::new(
                            ErrorKind::DimensionMismatch,
                            span,
                            format!(
                                "space `{name}` has dim {dim} but {} basis labels",
                                basis.len()
                            ),
                        ));
                    }
                }
                Ok(Item::Space {
                    name,
                    dim,
                    basis,
                    span,
                })
            }
            "state" | "projector" | "operator" => {
                self.pos += 1;
                let name = self.name()?;
                self.expect_sym("=")?;
                let expr = self.expr()?;
                Ok(match keyword.as_str() {
                    "state" => Item::State { name, expr, span },
                    "projector" => Item::Projector { name, expr, span },
                    _ => Item::Operator { name, expr, span },
                })
            }
            "times" => {
                self.pos += 1;
                let mut entries = Vec::new();
                while let Tok::Ident(label) = self.peek().clone() {
                    self.pos += 1;
                    let value = if self.eat_sym("=") {
                        Some(self.number()?)
                    } else {
                        None
                    };
                    entries.push((label, value));
                }
                if entries.is_empty() {
                    return self.error("time labels");
                }
                Ok(Item::Times { entries, span })
            }
            "hamiltonian" => {
                self.pos += 1;
                Ok(Item::Hamiltonian {
                    expr: self.expr()?,
                    span,
                })
            }
            "step" => {
                self.pos += 1;
                let from = self.name()?;
                let to = self.name()?;
                Ok(Item::Step {
                    from,
                    to,
                    expr: self.expr()?,
                    span,
                })
            }
            "history" => {
                self.pos += 1;
                let name = self.name()?;
                self.expect_sym("=")?;
                let body = match self.try_events()? {
                    Some(events) => HistoryBody::Events(events),
                    None => HistoryBody::Generalized(self.expr()?),
                };
                Ok(Item::History { name, body, span })
            }
            "family" => {
                self.pos += 1;
                let name = self.name()?;
                self.expect_sym("=")?;
                self.expect_sym("{")?;
                let mut members = Vec::new();
                while !self.eat_sym("}") {
                    let mspan = self.span();
                    if self.eat_sym("(") {
                        let events = self.events()?;
                        self.expect_sym(")")?;
                        members.push(FamilyMember::Events(events, mspan));
                    } else if let Tok::Ident(_) = self.peek() {
                        members.push(FamilyMember::Name(self.name()?, mspan));
                    } else {
                        return self.error("a history, family or `(projector @ time)`");
                    }
                    self.eat_sym(",");
                }
                Ok(Item::Family {
                    name,
                    members,
                    span,
                })
            }
            "query" => {
                self.pos += 1;
                self.query(span)
            }
            "prob" | "weight" | "consistent" | "infer" | "compatible" => self.query(span),
            other => Err(DslError::syntax(
                span,
                format!("unknown declaration `{other}`"),
            )),
        }
    }

    fn query(&mut self, span: Span) -> Result<Item, DslError> {
        let kind = self.name()?;
        let query = match kind.as_str() {
            "prob" => {
                let target = self.hexpr()?;
                self.expect_keyword("given")?;
                let given = self.hexpr()?;
                self.expect_keyword("in")?;
                Query::Prob {
                    target,
                    given,
                    family: self.name()?,
                }
            }
            "weight" => {
                let target = self.hexpr()?;
                self.expect_keyword("in")?;
                Query::Weight {
                    target,
                    family: self.name()?,
                }
            }
            "consistent" => Query::Consistent {
                family: self.name()?,
            },
            "infer" => {
                let assumptions = self.pairs()?;
                self.expect_sym("=>")?;
                let conclusions = self.pairs()?;
                Query::Infer {
                    assumptions,
                    conclusions,
                }
            }
            "compatible" => {
                self.expect_sym("{")?;
                let mut families = Vec::new();
                while !self.eat_sym("}") {
                    families.push(self.name()?);
                    self.eat_sym(",");
                }
                Query::Compatible { families }
            }
            other => return Err(DslError::syntax(span, format!("unknown query `{other}`"))),
        };
        let expect = if self.peek_ident() == Some("expect") {
            self.pos += 1;
            match self.peek_ident() {
                Some(w) if EXPECT_WORDS.contains(&w) => {
                    let w = w.to_owned();
                    self.pos += 1;
                    Some(Expect::Word(w))
                }
                _ => Some(Expect::Value(self.expr()?)),
            }
        } else {
            None
        };
        Ok(Item::Query {
            query,
            expect,
            span,
        })
    }

    fn pairs(&mut self) -> Result<Vec<(String, HExpr)>, DslError> {
        self.expect_sym("{")?;
        let mut out = Vec::new();
        while !self.eat_sym("}") {
            self.expect_sym("(")?;
            let family = self.name()?;
            self.expect_sym(",")?;
            let h = self.hexpr()?;
            self.expect_sym(")")?;
            out.push((family, h));
            self.eat_sym(",");
        }
        Ok(out)
    }

    /// `expr @ time (, expr @ time)*`.
    fn events(&mut self) -> Result<Events, DslError> {
        let mut events = Vec::new();
        loop {
            let e = self.expr()?;
            self.expect_sym("@")?;
            events.push((e, self.name()?));
            if !self.eat_sym(",") {
                return Ok(events);
            }
        }
    }

    /// Parses an event list if one starts here; otherwise rewinds.
    fn try_events(&mut self) -> Result<Option<Events>, DslError> {
        let start = self.pos;
        if self.expr().is_ok() && self.is_sym("@") {
            self.pos = start;
            return self.events().map(Some);
        }
        self.pos = start;
        Ok(None)
    }

    fn hexpr(&mut self) -> Result<HExpr, DslError> {
        let mut left = self.hand()?;
        while self.eat_sym("|") {
            left = HExpr::Or(Box::new(left), Box::new(self.hand()?));
        }
        Ok(left)
    }

    fn hand(&mut self) -> Result<HExpr, DslError> {
        let mut left = self.hnot()?;
        while self.eat_sym("&") {
            left = HExpr::And(Box::new(left), Box::new(self.hnot()?));
        }
        Ok(left)
    }

    fn hnot(&mut self) -> Result<HExpr, DslError> {
        if self.eat_sym("~") {
            return Ok(HExpr::Not(Box::new(self.hnot()?)));
        }
        let span = self.span();
        if self.is_sym("(") {
            let start = self.pos;
            self.pos += 1;
            if let Some(events) = self.try_events()? {
                self.expect_sym(")")?;
                return Ok(HExpr::Events(events, span));
            }
            self.pos = start + 1;
            let inner = self.hexpr()?;
            self.expect_sym(")")?;
            return Ok(inner);
        }
        if let Some(events) = self.try_events()? {
            return Ok(HExpr::Events(events, span));
        }
        match self.peek_ident() {
            Some(_) => Ok(HExpr::Name(self.name()?, span)),
            None => self.error("a history"),
        }
    }

    fn expr(&mut self) -> Result<Expr, DslError> {
        let mut left = self.term()?;
        loop {
            let op = if self.eat_sym("+") {
                BinOp::Add
            } else if self.eat_sym("-") {
                BinOp::Sub
            } else {
                return Ok(left);
            };
            left = Expr::Bin(op, Box::new(left), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr, DslError> {
        let mut left = self.unary()?;
        loop {
            let op = if self.eat_sym("*") {
                BinOp::Mul
            } else if self.eat_sym("/") {
                BinOp::Div
            } else {
                return Ok(left);
            };
            left = Expr::Bin(op, Box::new(left), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr, DslError> {
        if self.eat_sym("-") {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.peek_ident() == Some("not") {
            self.pos += 1;
            return Ok(Expr::Not(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn on_spaces(&mut self) -> Vec<String> {
        let mut spaces = Vec::new();
        if self.peek_ident() == Some("on") {
            self.pos += 1;
            while let Some(s) = self.peek_ident() {
                if RESERVED.contains(&s) {
                    break;
                }
                spaces.push(s.to_owned());
                self.pos += 1;
            }
        }
        spaces
    }

    /// Row-major `[[a, b], [c, d]] [on S...]`.
    fn matrix(&mut self, span: Span) -> Result<Expr, DslError> {
        self.expect_sym("[")?;
        let mut rows = Vec::new();
        loop {
            self.expect_sym("[")?;
            let mut row = vec![self.expr()?];
            while self.eat_sym(",") {
                row.push(self.expr()?);
            }
            self.expect_sym("]")?;
            rows.push(row);
            if !self.eat_sym(",") {
                break;
            }
        }
        self.expect_sym("]")?;
        Ok(Expr::Matrix(rows, self.on_spaces(), span))
    }

    fn atom(&mut self) -> Result<Expr, DslError> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Number(x) => {
                self.pos += 1;
                Ok(Expr::Real(x))
            }
            Tok::Imag(x) => {
                self.pos += 1;
                Ok(Expr::Imag(x))
            }
            Tok::Sym("(") => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            // A bare `[[...], ...]` is a matrix literal.
            Tok::Sym("[") => self.matrix(span),
            Tok::Ident(name) => {
                self.pos += 1;
                match name.as_str() {
                    "i" => Ok(Expr::Imag(1.0)),
                    "sqrt2" => Ok(Expr::Sqrt(Box::new(Expr::Real(2.0)))),
                    "sqrt" => {
                        self.expect_sym("(")?;
                        let e = self.expr()?;
                        self.expect_sym(")")?;
                        Ok(Expr::Sqrt(Box::new(e)))
                    }
                    "ket" => Ok(Expr::Ket(Box::new(self.atom()?))),
                    "span" => {
                        self.expect_sym("{")?;
                        let mut vs = Vec::new();
                        while !self.eat_sym("}") {
                            vs.push(self.expr()?);
                            self.eat_sym(",");
                        }
                        Ok(Expr::SpanOf(vs, span))
                    }
                    "diag" => {
                        let mut entries = Vec::new();
                        while let Tok::Number(x) = self.peek().clone() {
                            self.pos += 1;
                            entries.push(x);
                        }
                        if entries.is_empty() {
                            return self.error("diagonal entries");
                        }
                        let on = self.on_spaces();
                        if on.len() > 1 {
                            return Err(DslError::syntax(span, "`diag` acts on a single space"));
                        }
                        Ok(Expr::Diag(entries, on.into_iter().next(), span))
                    }
                    "tensor" => {
                        self.expect_sym("(")?;
                        let mut parts = vec![self.expr()?];
                        while self.eat_sym(",") {
                            parts.push(self.expr()?);
                        }
                        self.expect_sym(")")?;
                        Ok(Expr::Tensor(parts, span))
                    }
                    "matrix" => self.matrix(span),
                    "map" => {
                        self.expect_sym("{")?;
                        let mut pairs = Vec::new();
                        while !self.eat_sym("}") {
                            let from = self.expr()?;
                            self.expect_sym("->")?;
                            pairs.push((from, self.expr()?));
                            if !self.eat_sym(";") {
                                self.eat_sym(",");
                            }
                        }
                        Ok(Expr::Map(pairs, span))
                    }
                    "I" => Ok(Expr::Identity(self.on_spaces(), span)),
                    other if RESERVED.contains(&other) => Err(DslError::syntax(
                        span,
                        format!("unexpected keyword `{other}` in expression"),
                    )),
                    _ => Ok(Expr::Name(name, span)),
                }
            }
            _ => self.error("an expression"),
        }
    }
}
