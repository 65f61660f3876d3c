use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use histlogic::{
    builtin, check_source, exit_code, render, run_builtin, run_source, settings, OutputFormat,
};

/// Checks reasoning about quantum systems with frameworks and consistent
/// histories.
#[derive(Parser)]
#[command(name = "histlogic", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(clap::Args)]
struct Tolerances {
    /// Truth tolerance (also read from HISTLOGIC_EPS).
    #[arg(long)]
    eps: Option<f64>,
    /// Bound on relative off-diagonal consistency terms.
    #[arg(long)]
    eps_consistency: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and elaborate a model file without evaluating queries.
    Check { file: PathBuf },
    /// Evaluate every query in a model file.
    Run {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        #[command(flatten)]
        tol: Tolerances,
    },
    /// Query a built-in model.
    Builtin {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(builtin::BUILTIN_NAMES))]
        name: String,
        /// A query, e.g. "prob (X+ @ t2) given (alpha @ t1) in F1".
        #[arg(long = "query")]
        queries: Vec<String>,
        /// Model parameter as key=value.
        #[arg(long = "param", value_parser = builtin::parse_param)]
        params: Vec<(String, String)>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        #[command(flatten)]
        tol: Tolerances,
    },
}

fn usage_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("histlogic: {msg}");
    ExitCode::from(2)
}

fn resolve(tol: &Tolerances) -> Result<histlogic_core::FamilySettings, String> {
    let eps = match tol.eps {
        Some(e) => Some(e),
        None => match std::env::var("HISTLOGIC_EPS") {
            Ok(v) => Some(
                v.parse::<f64>()
                    .map_err(|_| format!("HISTLOGIC_EPS is not a number: `{v}`"))?,
            ),
            Err(_) => None,
        },
    };
    settings(eps, tol.eps_consistency)
}

fn output(format: Format) -> OutputFormat {
    match format {
        Format::Text => OutputFormat::Text,
        Format::Json => OutputFormat::Json,
    }
}

fn finish(text: String, code: i32) -> ExitCode {
    print!("{text}");
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Check { file } => {
            let text = match std::fs::read_to_string(&file) {
                Ok(t) => t,
                Err(e) => return usage_error(format!("{}: {e}", file.display())),
            };
            match check_source(&text, Default::default()) {
                Ok(env) => finish(
                    format!(
                        "{}: ok ({} declarations, {} queries)\n",
                        file.display(),
                        env.declaration_count(),
                        env.queries.len()
                    ),
                    0,
                ),
                Err(e) => usage_error(format!("{}:{e}", file.display())),
            }
        }
        Command::Run { file, format, tol } => {
            let settings = match resolve(&tol) {
                Ok(s) => s,
                Err(e) => return usage_error(e),
            };
            let text = match std::fs::read_to_string(&file) {
                Ok(t) => t,
                Err(e) => return usage_error(format!("{}: {e}", file.display())),
            };
            match run_source(&text, settings) {
                Ok(results) => {
                    let source = file.display().to_string();
                    finish(
                        render(&source, &results, output(format)),
                        exit_code(&results),
                    )
                }
                Err(e) => usage_error(format!("{}:{e}", file.display())),
            }
        }
        Command::Builtin {
            name,
            queries,
            params,
            format,
            tol,
        } => {
            let settings = match resolve(&tol) {
                Ok(s) => s,
                Err(e) => return usage_error(e),
            };
            match run_builtin(&name, &params, &queries, settings) {
                Ok(results) => finish(render(&name, &results, output(format)), exit_code(&results)),
                Err(e) => usage_error(e),
            }
        }
    }
}
