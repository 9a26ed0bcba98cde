//! Tables, manifests and their CSV/JSON encodings.
//!
//! CSV layout (schema `gfsim-csv/1`): `# key: value` manifest lines, one
//! header row, then data rows. Reals use the shortest representation that
//! round-trips, so equal runs give equal bytes. Wall time is kept out of the
//! CSV and written to `manifest.json` only.

use std::fmt::Write;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const CSV_SCHEMA: &str = "gfsim-csv/1";

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Value {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Num(v)
    }
}
impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::Int(v as i64)
    }
}
impl From<u32> for Value {
    fn from(v: u32) -> Self {
        Value::Int(i64::from(v))
    }
}
impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}
impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}
impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}
impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

impl Value {
    fn csv(&self) -> String {
        match self {
            Value::Num(x) => format!("{x}"),
            Value::Int(i) => i.to_string(),
            Value::Bool(b) => b.to_string(),
            Value::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Value::Text(s) => s.clone(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Num(x) => Some(*x),
            Value::Int(i) => Some(*i as f64),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the schema");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Value>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[k]).collect())
    }
}

/// Everything that determines an output, plus the wall time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub schema: String,
    pub experiment: String,
    pub anchor: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub version: String,
    pub delta: f64,
    pub x_min: f64,
    pub x0_floor: f64,
    pub replicas: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl RunManifest {
    fn lines(&self) -> Vec<(&'static str, String)> {
        vec![
            ("schema", self.schema.clone()),
            ("experiment", self.experiment.clone()),
            ("anchor", self.anchor.clone()),
            ("config_hash", self.config_hash.clone()),
            ("master_seed", self.master_seed.to_string()),
            ("version", self.version.clone()),
            ("delta", self.delta.to_string()),
            ("x_min", self.x_min.to_string()),
            ("x0_floor", self.x0_floor.to_string()),
            ("replicas", self.replicas.to_string()),
        ]
    }
}

pub fn sha256_hex(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        write!(s, "{b:02x}").unwrap();
        s
    })
}

pub fn to_csv(manifest: &RunManifest, table: &Table) -> String {
    let mut s = String::new();
    for (k, v) in manifest.lines() {
        writeln!(s, "# {k}: {v}").unwrap();
    }
    writeln!(s, "{}", table.columns.join(",")).unwrap();
    for r in &table.rows {
        let cells: Vec<String> = r.iter().map(Value::csv).collect();
        writeln!(s, "{}", cells.join(",")).unwrap();
    }
    s
}

#[derive(Serialize)]
struct JsonDoc<'a> {
    manifest: &'a RunManifest,
    passed: Option<bool>,
    summary: &'a [String],
    columns: &'a [String],
    rows: &'a [Vec<Value>],
}

pub fn to_json(manifest: &RunManifest, passed: Option<bool>, summary: &[String], table: &Table) -> String {
    let m = RunManifest { wall_time_s: None, ..manifest.clone() };
    let doc = JsonDoc { manifest: &m, passed, summary, columns: &table.columns, rows: &table.rows };
    serde_json::to_string_pretty(&doc).expect("serializable") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest() -> RunManifest {
        RunManifest {
            schema: CSV_SCHEMA.into(),
            experiment: "demo".into(),
            anchor: "a = b".into(),
            config_hash: sha256_hex(""),
            master_seed: 1,
            version: "0".into(),
            delta: 0.01,
            x_min: 0.005,
            x0_floor: 1e-8,
            replicas: 3,
            wall_time_s: Some(1.5),
        }
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new(&["t", "ok", "note"]);
        t.push(vec![0.1.into(), true.into(), "a,b".into()]);
        let csv = to_csv(&manifest(), &t);
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with("# schema: gfsim-csv/1"));
        assert!(!csv.contains("wall"));
        assert_eq!(lines[lines.len() - 2], "t,ok,note");
        assert_eq!(lines[lines.len() - 1], "0.1,true,\"a,b\"");
    }

    #[test]
    fn json_has_no_wall_time() {
        let t = Table::new(&["x"]);
        let j = to_json(&manifest(), Some(true), &[], &t);
        assert!(!j.contains("wall_time"));
        let v: serde_json::Value = serde_json::from_str(&j).unwrap();
        assert_eq!(v["passed"], serde_json::Value::Bool(true));
    }

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
