//! Rendering reports as JSON, key/value CSV or plain text.

use std::io::Write;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

/// Report object with the schema version and command name in front.
pub fn envelope<T: Serialize>(command: &str, body: &T) -> Result<Value, CliError> {
    let body = serde_json::to_value(body).map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut map = Map::new();
    map.insert("schema_version".into(), SCHEMA_VERSION.into());
    map.insert("command".into(), command.into());
    match body {
        Value::Object(fields) => map.extend(fields),
        other => {
            map.insert("result".into(), other);
        }
    }
    Ok(Value::Object(map))
}

fn flatten(prefix: &str, value: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                flatten(&key(k), v, out);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&key(&i.to_string()), v, out);
            }
        }
        Value::Null => out.push((prefix.to_string(), String::new())),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

/// Dotted `key, value` pairs of every leaf, in document order.
pub fn leaves(value: &Value) -> Vec<(String, String)> {
    let mut out = Vec::new();
    flatten("", value, &mut out);
    out
}

pub fn emit(out: &mut dyn Write, value: &Value, format: Format) -> Result<(), CliError> {
    match format {
        Format::Json => {
            let text = serde_json::to_string_pretty(value)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            writeln!(out, "{text}")?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["key", "value"])?;
            for (k, v) in leaves(value) {
                w.write_record([k, v])?;
            }
            w.flush()?;
        }
        Format::Text => {
            for (k, v) in leaves(value) {
                writeln!(out, "{k}: {v}")?;
            }
        }
    }
    Ok(())
}
