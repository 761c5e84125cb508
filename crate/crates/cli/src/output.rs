//! Tables, CSV formatting and the result envelope.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::config::{ExperimentConfig, Format};
use crate::error::{io_error, CliError};

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Uint(u64),
    Bool(bool),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Uint(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Uint(v as u64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Text(String::new()), Into::into)
    }
}

/// Scientific notation with `digits` significant digits; `NaN`, `inf`, `-inf` otherwise.
pub fn format_float(x: f64, digits: usize) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{:.*e}", digits.saturating_sub(1), x)
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl Cell {
    fn to_csv(&self, digits: usize) -> String {
        match self {
            Cell::Float(x) => format_float(*x, digits),
            Cell::Int(v) => v.to_string(),
            Cell::Uint(v) => v.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => csv_field(s),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Float(x) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Cell::Int(v) => json!(v),
            Cell::Uint(v) => json!(v),
            Cell::Bool(b) => json!(b),
            Cell::Text(s) => json!(s),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv(&self, digits: usize) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = row.iter().map(|c| c.to_csv(digits)).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Array(r.iter().map(Cell::to_json).collect()))
            .collect();
        json!({ "columns": self.columns, "rows": rows })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Diagnostics {
    /// Angles used per quadrature evaluation, summarized.
    pub quadrature_evaluations: usize,
    pub max_angles: usize,
    pub unconverged: usize,
    pub warnings: Vec<String>,
    pub extra: Map<String, Value>,
}

impl Diagnostics {
    pub fn record_angles(&mut self, angles: &[usize], converged: &[bool]) {
        self.quadrature_evaluations += angles.len();
        self.max_angles = self.max_angles.max(angles.iter().copied().max().unwrap_or(0));
        self.unconverged += converged.iter().filter(|c| !**c).count();
    }

    fn to_json(&self) -> Value {
        json!({
            "quadrature": {
                "evaluations": self.quadrature_evaluations,
                "max_angles": self.max_angles,
                "unconverged": self.unconverged,
            },
            "warnings": self.warnings,
            "extra": Value::Object(self.extra.clone()),
        })
    }
}

/// Everything a command produces.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOutput {
    pub tables: Vec<Table>,
    pub diagnostics: Diagnostics,
}

pub const RESOLVED_CONFIG: &str = "resolved_config.json";

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_error(path, e))
}

/// Writes tables, the envelope and the resolved config; returns the written paths.
pub fn emit(config: &ExperimentConfig, output: &RunOutput) -> Result<Vec<PathBuf>, CliError> {
    let dir = &config.output.dir;
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let digits = config.output.precision;
    let command = config.command.map_or("run", |c| c.name());
    let mut written = Vec::new();

    let payload = match config.output.format {
        Format::Csv => {
            let mut files = Vec::new();
            for t in &output.tables {
                let path = dir.join(format!("{}.csv", t.name));
                write(&path, &t.to_csv(digits))?;
                files.push(json!(format!("{}.csv", t.name)));
                written.push(path);
            }
            json!({ "files": files })
        }
        Format::Json => {
            let mut tables = Map::new();
            for t in &output.tables {
                tables.insert(t.name.clone(), t.to_json());
            }
            Value::Object(tables)
        }
    };

    let envelope = json!({
        "command": command,
        "payload": payload,
        "provenance": {
            "config_hash": config.hash(),
            "seed": config.model.seed,
            "code_version": env!("CARGO_PKG_VERSION"),
            "timestamp": chrono::Utc::now().to_rfc3339(),
        },
        "diagnostics": output.diagnostics.to_json(),
    });
    let path = dir.join(format!("{command}.json"));
    write(
        &path,
        &serde_json::to_string_pretty(&envelope).expect("envelope serializes"),
    )?;
    written.push(path);

    let path = dir.join(RESOLVED_CONFIG);
    write(&path, &config.to_json())?;
    written.push(path);
    Ok(written)
}
