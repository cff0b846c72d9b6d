//! One-parameter sweeps over a scenario.

use rayon::prelude::*;
use toml::Value;

use super::config::{parse_scenario, serialize_scenario, Scenario, ScenarioError};
use super::run::{execute, RunError, RunSummary};
use crate::sim::fmt_f64;

/// Result of one sweep point.
#[derive(Debug)]
pub struct SweepPoint {
    pub value: f64,
    pub outcome: Result<RunSummary, RunError>,
}

fn path_error(path: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation(vec![super::config::Issue {
        line: None,
        field: path.to_string(),
        message: message.into(),
    }])
}

/// Copy of `base` with the field at dotted `path` set to `value`.
///
/// Paths use the document layout, with numeric segments indexing arrays:
/// `attack.0.gamma`, `model.generators.1.d`, `integrator.dt`.
pub fn with_parameter(base: &Scenario, path: &str, value: f64) -> Result<Scenario, ScenarioError> {
    let mut doc: Value = toml::from_str(&serialize_scenario(base)).expect("serializer output parses");
    let mut node = &mut doc;
    for seg in path.split('.') {
        node = match node {
            Value::Table(t) => t
                .get_mut(seg)
                .ok_or_else(|| path_error(path, format!("no field `{seg}`")))?,
            Value::Array(a) => {
                let k: usize = seg
                    .parse()
                    .map_err(|_| path_error(path, format!("`{seg}` is not an array index")))?;
                let len = a.len();
                a.get_mut(k)
                    .ok_or_else(|| path_error(path, format!("index {k} out of range ({len})")))?
            }
            _ => return Err(path_error(path, format!("cannot descend into `{seg}`"))),
        };
    }
    *node = match node {
        Value::Float(_) => Value::Float(value),
        Value::Integer(_) if value.fract() == 0.0 && value.abs() < 9.0e15 => Value::Integer(value as i64),
        Value::Boolean(_) if value == 0.0 || value == 1.0 => Value::Boolean(value == 1.0),
        _ => return Err(path_error(path, "field is not numeric")),
    };
    parse_scenario(&toml::to_string(&doc).expect("edited document serializes"))
}

/// Runs `base` once per value, in parallel; results keep the order of `values`.
pub fn sweep(base: &Scenario, path: &str, values: &[f64]) -> Result<Vec<SweepPoint>, ScenarioError> {
    let scenarios = values
        .iter()
        .map(|&v| with_parameter(base, path, v))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(scenarios
        .par_iter()
        .zip(values.par_iter())
        .map(|(s, &value)| SweepPoint {
            value,
            outcome: execute(s).map(|o| o.summary),
        })
        .collect())
}

/// Summary table with one row per sweep point.
pub fn sweep_csv(header: &str, path: &str, points: &[SweepPoint]) -> Vec<u8> {
    let mut out = format!("# {header}\n{path},status,{}\n", RunSummary::HEADER);
    for p in points {
        match &p.outcome {
            Ok(s) => out.push_str(&format!("{},ok,{}\n", fmt_f64(p.value), s.csv_row())),
            Err(e) => {
                let msg = e.to_string().replace([',', '\n'], " ");
                out.push_str(&format!("{},error: {msg},,,,,,,\n", fmt_f64(p.value)));
            }
        }
    }
    out.into_bytes()
}
