//! Model-file language and query evaluation on top of `histlogic-core`.

pub mod builtin;
pub mod dsl;
pub mod env;
pub mod eval;
pub mod report;

use histlogic_core::{FamilySettings, Tolerance};

use crate::dsl::{parse_model, parse_query, DslError};
use crate::env::Environment;
use crate::eval::{Evaluator, QueryResult, Status};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Text,
    Json,
}

/// Family settings from the truth tolerance and the consistency bound.
pub fn settings(eps: Option<f64>, eps_consistency: Option<f64>) -> Result<FamilySettings, String> {
    let mut s = FamilySettings::default();
    if let Some(eps) = eps {
        s.tol = Tolerance::new(eps).map_err(|e| e.to_string())?;
    }
    if let Some(ec) = eps_consistency {
        if !(ec.is_finite() && ec >= 0.0) {
            return Err(format!("invalid consistency bound {ec}"));
        }
        s.eps_consistency = ec;
    }
    Ok(s)
}

/// Parses and elaborates a model file without evaluating queries.
pub fn check_source(text: &str, settings: FamilySettings) -> Result<Environment, DslError> {
    Environment::elaborate(&parse_model(text)?, settings)
}

pub fn run_source(text: &str, settings: FamilySettings) -> Result<Vec<QueryResult>, DslError> {
    let env = check_source(text, settings)?;
    Ok(Evaluator::new(&env).run_all())
}

/// Runs query strings against a built-in model.
pub fn run_builtin(
    name: &str,
    params: &[(String, String)],
    queries: &[String],
    settings: FamilySettings,
) -> Result<Vec<QueryResult>, String> {
    let model = builtin::build_builtin(name, params)?;
    let env = Environment::from_model(&model, settings);
    let texts = if queries.is_empty() {
        builtin::default_queries(&model)
    } else {
        queries.to_vec()
    };
    let elaborated = texts
        .iter()
        .map(|q| {
            let item = parse_query(q).map_err(|e| format!("query `{q}`: {e}"))?;
            env.elaborate_query(&item)
                .map_err(|e| format!("query `{q}`: {e}"))
        })
        .collect::<Result<Vec<_>, String>>()?;
    let mut ev = Evaluator::new(&env);
    Ok(elaborated
        .iter()
        .enumerate()
        .map(|(i, q)| ev.run(i + 1, q))
        .collect())
}

pub fn render(source: &str, results: &[QueryResult], format: OutputFormat) -> String {
    match format {
        OutputFormat::Text => report::text_report(source, results),
        OutputFormat::Json => report::json_report(source, results),
    }
}

/// 0 when every query succeeded, 1 otherwise.
pub fn exit_code(results: &[QueryResult]) -> i32 {
    if results.iter().all(|r| r.status == Status::Ok) {
        0
    } else {
        1
    }
}
