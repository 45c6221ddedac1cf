//! JSON documents with errors located by field path.

use std::fs;
use std::path::Path;

use ancova_core::{DgpSpec, SimPlan};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

fn schema(source: &Path, field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Schema {
        path: source.to_path_buf(),
        field: field.into(),
        reason: reason.into(),
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_value(text: &str, source: &Path) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| Error::Format {
        path: source.to_path_buf(),
        reason: format!("invalid JSON: {e}"),
    })
}

/// Deserialises `value`, reporting the path of the first offending field.
pub fn from_value<T: DeserializeOwned>(value: Value, source: &Path) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let field = match e.path().to_string() {
            p if p == "." => "(root)".to_owned(),
            p => p,
        };
        schema(source, field, e.into_inner().to_string())
    })
}

pub fn from_str<T: DeserializeOwned>(text: &str, source: impl AsRef<Path>) -> Result<T> {
    let source = source.as_ref();
    from_value(parse_value(text, source)?, source)
}

fn located(err: ancova_core::Error, source: &Path, prefix: &str) -> Error {
    match err {
        ancova_core::Error::InvalidParameter { field, reason } => {
            schema(source, format!("{prefix}{field}"), reason)
        }
        other => other.into(),
    }
}

/// A data-generating process, given either bare or as the `dgp` member of a
/// simulation plan.
pub fn parse_dgp(text: &str, source: impl AsRef<Path>) -> Result<DgpSpec> {
    let source = source.as_ref();
    let value = parse_value(text, source)?;
    let (dgp, prefix) = match value {
        Value::Object(ref map) if map.contains_key("dgp") => {
            (from_value::<SimPlan>(value, source)?.dgp, "dgp.")
        }
        other => (from_value::<DgpSpec>(other, source)?, ""),
    };
    dgp.validate().map_err(|e| located(e, source, prefix))?;
    Ok(dgp)
}

pub fn load_dgp(path: impl AsRef<Path>) -> Result<DgpSpec> {
    let path = path.as_ref();
    parse_dgp(&read_text(path)?, path)
}

/// One plan or an array of plans.
pub fn parse_plans(text: &str, source: impl AsRef<Path>) -> Result<Vec<SimPlan>> {
    let source = source.as_ref();
    let plans: Vec<SimPlan> = match parse_value(text, source)? {
        Value::Array(items) => items
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                from_value(v, source).map_err(|e| match e {
                    Error::Schema { path, field, reason } => Error::Schema {
                        path,
                        field: if field == "(root)" {
                            format!("[{i}]")
                        } else {
                            format!("[{i}].{field}")
                        },
                        reason,
                    },
                    other => other,
                })
            })
            .collect::<Result<_>>()?,
        single => vec![from_value(single, source)?],
    };
    Ok(plans)
}

pub fn load_plans(path: impl AsRef<Path>) -> Result<Vec<SimPlan>> {
    let path = path.as_ref();
    parse_plans(&read_text(path)?, path)
}

/// Validates a plan, locating failures within `source`.
pub fn validate_plan(plan: &SimPlan, source: &Path) -> Result<()> {
    plan.validate().map_err(|e| located(e, source, ""))
}

/// Pretty JSON with a trailing newline.
pub fn to_pretty<T: Serialize + ?Sized>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialise");
    text.push('\n');
    text
}
