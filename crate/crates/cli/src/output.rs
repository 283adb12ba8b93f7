//! Artifact writers. Floats are rounded to 12 significant digits so that
//! last-bit differences between math libraries do not reach the files.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Rounds to 12 significant digits; non-finite values pass through.
pub fn round12(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.11e}").parse().unwrap_or(v)
}

/// Shortest decimal form of the rounded value; empty for non-finite.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{}", round12(v))
    } else {
        String::new()
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if !n.is_i64() && !n.is_u64() => {
            if let Some(x) = n.as_f64() {
                *v = serde_json::Number::from_f64(round12(x)).map_or(Value::Null, Value::Number);
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_value),
        Value::Object(o) => o.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Serialises `body` into a JSON object headed by `schema_version` and
/// `command`, with every float rounded.
pub fn document(command: &str, body: &impl Serialize) -> Value {
    let mut out = Map::new();
    out.insert("schema_version".into(), SCHEMA_VERSION.into());
    out.insert("command".into(), command.into());
    match serde_json::to_value(body).unwrap_or(Value::Null) {
        Value::Object(m) => out.extend(m),
        other => {
            out.insert("result".into(), other);
        }
    }
    let mut v = Value::Object(out);
    round_value(&mut v);
    v
}

/// Dotted key paths and scalar values of a JSON tree, in document order.
pub fn flatten(v: &Value) -> Vec<(String, String)> {
    fn walk(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
        let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
        match v {
            Value::Object(m) => m.iter().for_each(|(k, v)| walk(&key(k), v, out)),
            Value::Array(a) => a.iter().enumerate().for_each(|(i, v)| walk(&key(&i.to_string()), v, out)),
            Value::Null => out.push((prefix.into(), String::new())),
            Value::String(s) => out.push((prefix.into(), s.clone())),
            Value::Number(n) => out.push((prefix.into(), n.to_string())),
            Value::Bool(b) => out.push((prefix.into(), b.to_string())),
        }
    }
    let mut out = Vec::new();
    walk("", v, &mut out);
    out
}

pub struct Writer {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Writer {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn json(&mut self, name: &str, v: &Value) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(v).expect("JSON values serialise");
        text.push('\n');
        self.bytes(name, text.as_bytes())
    }

    /// Writes a header and rows of already formatted cells.
    pub fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let err = |e: csv::Error| CliError::io(&self.dir.join(name), e);
        w.write_record(header).map_err(err)?;
        for r in rows {
            w.write_record(r).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::io(&self.dir.join(name), e.error()))?;
        self.bytes(name, &bytes)
    }

    /// One `key,value` row per scalar of the document.
    pub fn flat(&mut self, name: &str, v: &Value) -> Result<(), CliError> {
        let rows: Vec<Vec<String>> = flatten(v).into_iter().map(|(k, v)| vec![k, v]).collect();
        self.table(name, &["key", "value"], &rows)
    }

    fn bytes(&mut self, name: &str, data: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, data).map_err(|e| CliError::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}
