use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use relcert::{DecisionProblem, Error, PairwiseSlice, Result};

pub const VERSION: &str = concat!("relcert ", env!("CARGO_PKG_VERSION"));

/// Stamp wrapped around every machine-readable result.
#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub version: &'static str,
    pub command: &'a str,
    pub seed: u64,
    pub result: T,
}

pub fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Validation(format!("cannot read {}: {e}", path.display())))
}

fn parse_error(path: &Path, e: serde_json::Error) -> Error {
    Error::Parse(format!("{}: {e}", path.display()))
}

/// Parses a document, unwrapping the `result` of a stamped output so that
/// one command's output can feed another.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read(path)?;
    let value: Value = serde_json::from_str(&text).map_err(|e| parse_error(path, e))?;
    match stamped_result(value) {
        Some(inner) => serde_json::from_value(inner).map_err(|e| parse_error(path, e)),
        None => serde_json::from_str(&text).map_err(|e| parse_error(path, e)),
    }
}

fn stamped_result(value: Value) -> Option<Value> {
    match value {
        Value::Object(mut m) if m.contains_key("version") && m.contains_key("result") => m.remove("result"),
        _ => None,
    }
}

/// A bundle document, a stamped `witness` output, or a stamped `falsify`
/// output that found one.
pub fn load_bundle(path: &Path) -> Result<relcert::WitnessBundle> {
    let text = read(path)?;
    let value: Value = serde_json::from_str(&text).map_err(|e| parse_error(path, e))?;
    match stamped_result(value) {
        Some(Value::Object(mut m)) if m.get("bundle").is_some_and(Value::is_object) => {
            serde_json::from_value(m.remove("bundle").expect("checked")).map_err(|e| parse_error(path, e))
        }
        Some(inner) => serde_json::from_value(inner).map_err(|e| parse_error(path, e)),
        None => serde_json::from_str(&text).map_err(|e| parse_error(path, e)),
    }
}

pub enum Instance {
    Problem(DecisionProblem),
    Slice(PairwiseSlice),
}

impl Instance {
    pub fn tier(&self) -> &'static str {
        match self {
            Instance::Problem(_) => "problem",
            Instance::Slice(_) => "slice",
        }
    }

    pub fn as_core(&self) -> relcert::taxonomy::Instance<'_> {
        match self {
            Instance::Problem(p) => relcert::taxonomy::Instance::Problem(p),
            Instance::Slice(s) => relcert::taxonomy::Instance::Slice(s),
        }
    }
}

/// A problem document or a slice document; slices are told apart by their
/// `coeffs` table.
pub fn load_instance(path: &Path) -> Result<Instance> {
    let text = read(path)?;
    let value: Value = serde_json::from_str(&text).map_err(|e| parse_error(path, e))?;
    let is_slice = |v: &Value| v.get("coeffs").is_some();
    match stamped_result(value.clone()) {
        Some(inner) if is_slice(&inner) => Ok(Instance::Slice(serde_json::from_value(inner).map_err(|e| parse_error(path, e))?)),
        Some(inner) => Ok(Instance::Problem(serde_json::from_value(inner).map_err(|e| parse_error(path, e))?)),
        None if is_slice(&value) => Ok(Instance::Slice(serde_json::from_str(&text).map_err(|e| parse_error(path, e))?)),
        None => Ok(Instance::Problem(serde_json::from_str(&text).map_err(|e| parse_error(path, e))?)),
    }
}

pub fn load_slice(path: &Path) -> Result<PairwiseSlice> {
    match load_instance(path)? {
        Instance::Slice(s) => Ok(s),
        Instance::Problem(_) => Err(Error::Validation(format!("{}: expected a slice document", path.display()))),
    }
}

pub fn load_problem(path: &Path, limits: &relcert::Limits) -> Result<DecisionProblem> {
    match load_instance(path)? {
        Instance::Problem(p) => Ok(p),
        Instance::Slice(s) => s.expand(limits),
    }
}

pub fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Validation(format!("cannot write {}: {e}", path.display())))
}
