//! Canonical text for a syntax tree. Binary expressions are fully
//! parenthesized so the output reparses to the same tree.

use std::fmt::Write;

use super::ast::*;

pub fn format_model(model: &Model) -> String {
    let mut out = String::new();
    for item in &model.items {
        out.push_str(&format_item(item));
        out.push('\n');
    }
    out
}

pub fn format_item(item: &Item) -> String {
    match item {
        Item::Space {
            name, dim, basis, ..
        } => {
            let mut s = format!("space {name} dim {dim}");
            if !basis.is_empty() {
                s.push_str(" basis ");
                s.push_str(&basis.join(" "));
            }
            s
        }
        Item::State { name, expr, .. } => format!("state {name} = {}", format_expr(expr)),
        Item::Projector { name, expr, .. } => format!("projector {name} = {}", format_expr(expr)),
        Item::Operator { name, expr, .. } => format!("operator {name} = {}", format_expr(expr)),
        Item::Times { entries, .. } => {
            let mut s = String::from("times");
            for (label, value) in entries {
                match value {
                    // `X+=1` would lex as `X`, `+`, ...
                    Some(v) if label.ends_with(['+', '-']) => write!(s, " {label} = {v}").unwrap(),
                    Some(v) => write!(s, " {label}={v}").unwrap(),
                    None => write!(s, " {label}").unwrap(),
                }
            }
            s
        }
        Item::Hamiltonian { expr, .. } => format!("hamiltonian {}", format_expr(expr)),
        Item::Step { from, to, expr, .. } => format!("step {from} {to} {}", format_expr(expr)),
        Item::History { name, body, .. } => match body {
            HistoryBody::Events(events) => format!("history {name} = {}", format_events(events)),
            HistoryBody::Generalized(e) => format!("history {name} = {}", format_expr(e)),
        },
        Item::Family { name, members, .. } => {
            let members: Vec<String> = members
                .iter()
                .map(|m| match m {
                    FamilyMember::Name(n, _) => n.clone(),
                    FamilyMember::Events(e, _) => format!("({})", format_events(e)),
                })
                .collect();
            format!("family {name} = {{ {} }}", members.join(", "))
        }
        Item::Query { query, expect, .. } => {
            let mut s = format!("query {}", format_query(query));
            match expect {
                Some(Expect::Value(e)) => write!(s, " expect {}", format_expr(e)).unwrap(),
                Some(Expect::Word(w)) => write!(s, " expect {w}").unwrap(),
                None => {}
            }
            s
        }
    }
}

pub fn format_query(q: &Query) -> String {
    let pairs = |ps: &[(String, HExpr)]| {
        ps.iter()
            .map(|(f, h)| format!("({f}, {})", format_hexpr(h)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    match q {
        Query::Prob {
            target,
            given,
            family,
        } => {
            format!(
                "prob {} given {} in {family}",
                format_hexpr(target),
                format_hexpr(given)
            )
        }
        Query::Weight { target, family } => format!("weight {} in {family}", format_hexpr(target)),
        Query::Consistent { family } => format!("consistent {family}"),
        Query::Infer {
            assumptions,
            conclusions,
        } => {
            format!(
                "infer {{{}}} => {{{}}}",
                pairs(assumptions),
                pairs(conclusions)
            )
        }
        Query::Compatible { families } => format!("compatible {{{}}}", families.join(", ")),
    }
}

pub fn format_events(events: &Events) -> String {
    events
        .iter()
        .map(|(e, t)| format!("{} @ {t}", format_expr(e)))
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn format_hexpr(h: &HExpr) -> String {
    match h {
        HExpr::Name(n, _) => n.clone(),
        HExpr::Events(e, _) => format!("({})", format_events(e)),
        HExpr::Not(x) => format!("~{}", format_hexpr(x)),
        HExpr::And(a, b) => format!("({} & {})", format_hexpr(a), format_hexpr(b)),
        HExpr::Or(a, b) => format!("({} | {})", format_hexpr(a), format_hexpr(b)),
    }
}

fn on_clause(spaces: &[String]) -> String {
    if spaces.is_empty() {
        String::new()
    } else {
        format!(" on {}", spaces.join(" "))
    }
}

pub fn format_expr(e: &Expr) -> String {
    let list = |xs: &[Expr]| xs.iter().map(format_expr).collect::<Vec<_>>().join(", ");
    match e {
        Expr::Real(x) => format!("{x}"),
        Expr::Imag(x) => format!("{x}i"),
        Expr::Name(n, _) => n.clone(),
        Expr::Neg(x) => format!("(-{})", format_expr(x)),
        Expr::Not(x) => format!("(not {})", format_expr(x)),
        Expr::Bin(op, a, b) => {
            let op = match op {
                BinOp::Add => "+",
                BinOp::Sub => "-",
                BinOp::Mul => "*",
                BinOp::Div => "/",
            };
            format!("({} {op} {})", format_expr(a), format_expr(b))
        }
        Expr::Sqrt(x) => format!("sqrt({})", format_expr(x)),
        Expr::Ket(x) => format!("ket ({})", format_expr(x)),
        Expr::SpanOf(vs, _) => format!("span {{{}}}", list(vs)),
        Expr::Diag(d, on, _) => {
            let entries: Vec<String> = d.iter().map(|x| format!("{x}")).collect();
            let on = on.as_ref().map(|s| format!(" on {s}")).unwrap_or_default();
            // Parenthesized so a following operator cannot be read as an
            // `on` clause continuation.
            format!("(diag {}{on})", entries.join(" "))
        }
        Expr::Tensor(xs, _) => format!("tensor({})", list(xs)),
        Expr::Matrix(rows, on, _) => {
            let rows: Vec<String> = rows.iter().map(|r| format!("[{}]", list(r))).collect();
            format!("(matrix [{}]{})", rows.join(", "), on_clause(on))
        }
        Expr::Map(pairs, _) => {
            let pairs: Vec<String> = pairs
                .iter()
                .map(|(a, b)| format!("{} -> {}", format_expr(a), format_expr(b)))
                .collect();
            format!("map {{{}}}", pairs.join("; "))
        }
        Expr::Identity(on, _) => format!("(I{})", on_clause(on)),
    }
}
