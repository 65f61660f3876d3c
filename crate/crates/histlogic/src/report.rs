//! Text and JSON reports. Both are deterministic for a given input.

use serde::Serialize;

use crate::env::Expectation;
use crate::eval::{Outcome, QueryResult, Status};
use histlogic_core::C64;

/// Largest family whose full Gram matrix is printed.
const GRAM_PRINT_LIMIT: usize = 16;

/// `%.12g`-style formatting, with negative zero printed as `0`.
pub fn fmt_g(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if !(-5..12).contains(&exp) {
        let m = mantissa.trim_end_matches('0').trim_end_matches('.');
        return format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs());
    }
    let decimals = (11 - exp).max(0) as usize;
    let fixed = format!("{x:.decimals$}");
    let fixed = if fixed.contains('.') {
        fixed.trim_end_matches('0').trim_end_matches('.').to_owned()
    } else {
        fixed
    };
    if fixed == "-0" {
        "0".into()
    } else {
        fixed
    }
}

pub fn fmt_complex(z: C64) -> String {
    let (re, im) = (fmt_g(z.re), fmt_g(z.im.abs()));
    if im == "0" {
        re
    } else if re == "0" {
        format!("{}{im}i", if z.im < 0.0 { "-" } else { "" })
    } else {
        format!("{re}{}{im}i", if z.im < 0.0 { "-" } else { "+" })
    }
}

fn expect_text(e: &Option<Expectation>) -> Option<String> {
    e.as_ref().map(|e| match e {
        Expectation::Value(v) => fmt_g(*v),
        Expectation::Word(w) => w.clone(),
    })
}

pub fn text_report(source: &str, results: &[QueryResult]) -> String {
    let mut out = format!("source: {source}\n");
    for r in results {
        out.push_str(&format!(
            "[{}] {} (line {})\n",
            r.index, r.query.text, r.query.span.line
        ));
        match &r.outcome {
            Outcome::Value(x) => out.push_str(&format!("    value: {}\n", fmt_g(*x))),
            Outcome::Consistency(c) => {
                out.push_str(&format!(
                    "    verdict: {}\n    atoms: {}\n    relative off-diagonal: {}\n    max weight: {}\n",
                    if c.consistent { "Consistent" } else { "Inconsistent" },
                    c.atoms,
                    fmt_g(c.relative_offdiag),
                    fmt_g(c.max_weight),
                ));
                let weights: Vec<String> = c.weights.iter().map(|w| fmt_g(*w)).collect();
                out.push_str(&format!("    weights: [{}]\n", weights.join(", ")));
                if c.atoms <= GRAM_PRINT_LIMIT {
                    out.push_str("    gram:\n");
                    for row in &c.gram {
                        let row: Vec<String> = row.iter().map(|z| fmt_complex(*z)).collect();
                        out.push_str(&format!("      [{}]\n", row.join(", ")));
                    }
                }
            }
            Outcome::Inference {
                reason,
                assumption_weight,
                witness,
            } => {
                out.push_str(&format!("    verdict: {reason}\n"));
                if let Some(w) = assumption_weight {
                    out.push_str(&format!("    assumption weight: {}\n", fmt_g(*w)));
                }
                if let Some(w) = witness {
                    out.push_str(&format!("    witness: {w}\n"));
                }
            }
            Outcome::Compatibility {
                compatible,
                atoms,
                reason,
            } => {
                out.push_str(&format!(
                    "    verdict: {}\n",
                    if *compatible {
                        "Compatible"
                    } else {
                        "Incompatible"
                    }
                ));
                if let Some(a) = atoms {
                    out.push_str(&format!("    atoms: {a}\n"));
                }
                if let Some(r) = reason {
                    out.push_str(&format!("    reason: {r}\n"));
                }
            }
            Outcome::Error(e) => out.push_str(&format!("    error: {e}\n")),
        }
        if let Some(e) = expect_text(&r.query.expect) {
            out.push_str(&format!("    expected: {e}\n"));
        }
        out.push_str(&format!("    status: {}\n", r.status.as_str()));
    }
    let s = Summary::of(results);
    out.push_str(&format!(
        "summary: {} queries, {} ok, {} failed, {} error\n",
        s.total, s.ok, s.failed, s.error
    ));
    out
}

#[derive(Serialize)]
struct Summary {
    total: usize,
    ok: usize,
    failed: usize,
    error: usize,
}

impl Summary {
    fn of(results: &[QueryResult]) -> Self {
        let count = |s: Status| results.iter().filter(|r| r.status == s).count();
        Self {
            total: results.len(),
            ok: count(Status::Ok),
            failed: count(Status::Failed),
            error: count(Status::Error),
        }
    }
}

#[derive(Serialize)]
struct JsonReport<'a> {
    schema: u32,
    source: &'a str,
    queries: Vec<JsonQuery>,
    summary: Summary,
}

#[derive(Serialize)]
struct JsonQuery {
    index: usize,
    line: usize,
    kind: &'static str,
    query: String,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    expect: Option<serde_json::Value>,
    result: serde_json::Value,
}

fn json_outcome(o: &Outcome) -> serde_json::Value {
    use serde_json::json;
    match o {
        Outcome::Value(x) => json!({ "value": x }),
        Outcome::Consistency(c) => json!({
            "verdict": if c.consistent { "consistent" } else { "inconsistent" },
            "atoms": c.atoms,
            "relative_offdiag": c.relative_offdiag,
            "max_weight": c.max_weight,
            "weights": c.weights,
            "gram": (c.atoms <= GRAM_PRINT_LIMIT).then(|| {
                c.gram.iter().map(|row| row.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>()).collect::<Vec<_>>()
            }),
        }),
        Outcome::Inference {
            assumption_weight,
            witness,
            ..
        } => json!({
            "verdict": o.word(),
            "assumption_weight": assumption_weight,
            "witness": witness,
        }),
        Outcome::Compatibility { atoms, reason, .. } => json!({
            "verdict": o.word(),
            "atoms": atoms,
            "reason": reason,
        }),
        Outcome::Error(e) => json!({ "verdict": "error", "error": e }),
    }
}

pub fn json_report(source: &str, results: &[QueryResult]) -> String {
    let queries = results
        .iter()
        .map(|r| JsonQuery {
            index: r.index,
            line: r.query.span.line,
            kind: r.query.kind.name(),
            query: r.query.text.clone(),
            status: r.status.as_str(),
            expect: r.query.expect.as_ref().map(|e| match e {
                Expectation::Value(v) => serde_json::json!(v),
                Expectation::Word(w) => serde_json::json!(w),
            }),
            result: json_outcome(&r.outcome),
        })
        .collect();
    let report = JsonReport {
        schema: 1,
        source,
        queries,
        summary: Summary::of(results),
    };
    let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
    s.push('\n');
    s
}
