//! Config files and their merge with command-line flags.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{config_err, CliError};

/// Reads a JSON or TOML object. The extension decides; otherwise JSON is tried first.
pub fn load(path: &str) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{path}: {e}")))?;
    let ext = Path::new(path).extension().and_then(|e| e.to_str()).unwrap_or("");
    let value: Value = match ext {
        "toml" => from_toml(&text, path)?,
        "json" => serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{path}: {e}")))?,
        _ => match serde_json::from_str(&text) {
            Ok(v) => v,
            Err(_) => from_toml(&text, path)?,
        },
    };
    match value {
        Value::Object(m) => Ok(m),
        _ => config_err(format!("{path}: top level must be a table/object")),
    }
}

fn from_toml(text: &str, path: &str) -> Result<Value, CliError> {
    let t: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(format!("{path}: {e}")))?;
    serde_json::to_value(t).map_err(|e| CliError::Config(format!("{path}: {e}")))
}

/// File values overlaid by every flag that was given, then parsed as `T`.
///
/// `allowed` lists the accepted keys; `command`, if present in the file,
/// must name the command being run. Returns the parsed value and the merged
/// object (for the metadata sidecar).
pub fn merge<T: Serialize + DeserializeOwned>(
    flags: &T,
    file: Option<&str>,
    command: &str,
    allowed: &[String],
) -> Result<(T, Value), CliError> {
    let mut merged = match file {
        Some(p) => load(p)?,
        None => Map::new(),
    };
    if let Some(v) = merged.remove("command") {
        if v.as_str() != Some(command) {
            return config_err(format!("config file is for command {v}, not `{command}`"));
        }
    }
    if let Some(bad) = merged.keys().find(|k| !allowed.iter().any(|a| a == *k)) {
        return config_err(format!("unknown config key `{bad}` for `{command}`"));
    }
    let given = serde_json::to_value(flags).map_err(|e| CliError::Config(e.to_string()))?;
    if let Value::Object(m) = given {
        for (k, v) in m {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    let merged = Value::Object(merged);
    let parsed = serde_json::from_value(merged.clone()).map_err(|e| CliError::Config(e.to_string()))?;
    Ok((parsed, merged))
}

pub fn require<T: Copy>(v: Option<T>, key: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Config(format!("missing required `{key}`")))
}
