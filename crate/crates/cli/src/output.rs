use std::io::Write;
use std::path::Path;

use serde::ser::{Serialize, Serializer};
use serde::Serialize as DeriveSerialize;

use crate::config::{AnalysisConfig, OutputFormat};
use crate::CliError;

/// One table cell. Floats are written with Rust's shortest round-trip
/// formatting, so output is identical across runs and platforms.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Float(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Value {
    fn csv_field(&self) -> String {
        match self {
            Value::Float(v) => format!("{v:?}"),
            Value::Int(v) => v.to_string(),
            Value::Text(s) => s.clone(),
            Value::Bool(b) => b.to_string(),
            Value::Empty => String::new(),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Float(v) if v.is_finite() => s.serialize_f64(*v),
            Value::Float(v) => s.serialize_str(&v.to_string()),
            Value::Int(v) => s.serialize_i64(*v),
            Value::Text(t) => s.serialize_str(t),
            Value::Bool(b) => s.serialize_bool(*b),
            Value::Empty => s.serialize_none(),
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}
impl From<Option<f64>> for Value {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Value::Empty, Value::Float)
    }
}
impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}
impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::Int(v as i64)
    }
}
impl From<u32> for Value {
    fn from(v: u32) -> Self {
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

#[derive(Debug, Clone, PartialEq, DeriveSerialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Value::csv_field))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }
}

#[derive(Debug, Clone, PartialEq, DeriveSerialize)]
pub struct RunMetadata {
    pub tool: String,
    pub version: String,
    pub verb: String,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, DeriveSerialize)]
pub struct ResultBundle {
    pub metadata: RunMetadata,
    /// The effective configuration, after command-line overrides.
    pub config: AnalysisConfig,
    pub tables: Vec<Table>,
    pub warnings: Vec<String>,
}

impl ResultBundle {
    pub fn new(verb: &str, config: &AnalysisConfig) -> Self {
        Self {
            metadata: RunMetadata {
                tool: "cellwlan".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                verb: verb.into(),
                seed: config.seed,
                config_hash: config.hash(),
            },
            config: config.clone(),
            tables: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bundle serializes");
        s.push('\n');
        s
    }

    /// Everything as text for standard output.
    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Doc => self.to_json(),
            OutputFormat::Csv => {
                let mut out = String::new();
                for w in &self.warnings {
                    out += &format!("# warning: {w}\n");
                }
                for t in &self.tables {
                    out += &format!("# {}\n{}\n", t.name, t.to_csv());
                }
                out
            }
        }
    }

    /// Writes `bundle.json`, the effective `config.toml`, and with the CSV
    /// format one `<table>.csv` per table.
    pub fn write_dir(&self, dir: &Path, format: OutputFormat) -> Result<(), CliError> {
        let io = |e: std::io::Error| CliError::Failure(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        write_file(&dir.join("bundle.json"), &self.to_json()).map_err(io)?;
        write_file(&dir.join("config.toml"), &self.config.to_toml()).map_err(io)?;
        if format == OutputFormat::Csv {
            for t in &self.tables {
                write_file(&dir.join(format!("{}.csv", t.name)), &t.to_csv()).map_err(io)?;
            }
        }
        Ok(())
    }
}

fn write_file(path: &Path, text: &str) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())
}
