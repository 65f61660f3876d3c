//! Built-in models selected by name, with `key=value` parameters.

use histlogic_core::models::{
    build_double_slit_model, build_spin_measurement_model, build_two_device_model,
    DoubleSlitParams, MiddleDevice, NamedModel, SpinCompletion,
};

pub const BUILTIN_NAMES: &[&str] = &["spin-measurement", "two-device", "double-slit"];

fn unknown_param(model: &str, key: &str) -> String {
    format!("model `{model}` has no parameter `{key}`")
}

fn number(key: &str, value: &str) -> Result<f64, String> {
    value
        .parse::<f64>()
        .map_err(|_| format!("parameter `{key}` needs a number, got `{value}`"))
}

pub fn build_builtin(name: &str, params: &[(String, String)]) -> Result<NamedModel, String> {
    let model = match name {
        "spin-measurement" => {
            let mut completion = SpinCompletion::default();
            for (k, v) in params {
                match (k.as_str(), v.as_str()) {
                    ("completion", "permutation") => completion = SpinCompletion::Permutation,
                    ("completion", "mixing") => completion = SpinCompletion::Mixing,
                    ("completion", "gram-schmidt") => completion = SpinCompletion::GramSchmidt,
                    ("completion", other) => {
                        return Err(format!(
                            "unknown completion `{other}` (permutation, mixing, gram-schmidt)"
                        ))
                    }
                    (k, _) => return Err(unknown_param(name, k)),
                }
            }
            build_spin_measurement_model(completion)
        }
        "two-device" => {
            let mut middle = MiddleDevice::None;
            for (k, v) in params {
                match (k.as_str(), v.as_str()) {
                    ("middle", "none") => middle = MiddleDevice::None,
                    ("middle", "sx") => middle = MiddleDevice::Sx,
                    ("middle", other) => {
                        return Err(format!("unknown middle device `{other}` (none, sx)"))
                    }
                    (k, _) => return Err(unknown_param(name, k)),
                }
            }
            build_two_device_model(middle)
        }
        "double-slit" => {
            let mut p = DoubleSlitParams::default();
            for (k, v) in params {
                match k.as_str() {
                    "m" => {
                        p.num_detectors = v.parse().map_err(|_| {
                            format!("parameter `m` needs a positive integer, got `{v}`")
                        })?
                    }
                    "phase_a" => p.phase_a = number(k, v)?,
                    "phase_b" => p.phase_b = number(k, v)?,
                    "reflect_amp" => p.reflect_amp = number(k, v)?,
                    k => return Err(unknown_param(name, k)),
                }
            }
            build_double_slit_model(p)
        }
        other => {
            return Err(format!(
                "unknown model `{other}` (available: {})",
                BUILTIN_NAMES.join(", ")
            ))
        }
    };
    model.map_err(|e| e.to_string())
}

/// Queries run when none are given: the consistency of every family.
pub fn default_queries(model: &NamedModel) -> Vec<String> {
    model
        .families
        .keys()
        .map(|f| format!("consistent {f}"))
        .collect()
}

/// Splits `key=value`.
pub fn parse_param(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((k, v)) if !k.is_empty() => Ok((k.trim().to_owned(), v.trim().to_owned())),
        _ => Err(format!("expected key=value, got `{s}`")),
    }
}
