//! Run manifests and tabular output (CSV with a commented header, or JSON).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<String>,
    /// Every setting that influences the numbers, as `name=value`.
    pub settings: Vec<String>,
    pub output: String,
    pub emitted_at: String,
    pub version: String,
}

impl RunManifest {
    pub fn new(command: &str, inputs: &[&Path], output: Option<&Path>) -> Self {
        Self {
            command: command.to_string(),
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            settings: Vec::new(),
            output: output.map_or_else(|| "-".to_string(), |p| p.display().to_string()),
            emitted_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            version: format!("scldpcl {}", env!("CARGO_PKG_VERSION")),
        }
    }

    pub fn set(&mut self, name: &str, value: impl std::fmt::Display) {
        self.settings.push(format!("{name}={value}"));
    }

    pub fn header(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# command: {}", self.command);
        let _ = writeln!(s, "# inputs: {}", self.inputs.join(" "));
        let _ = writeln!(s, "# settings: {}", self.settings.join(" "));
        let _ = writeln!(s, "# output: {}", self.output);
        let _ = writeln!(s, "# emitted_at: {}", self.emitted_at);
        let _ = writeln!(s, "# version: {}", self.version);
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
    Inf,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v:.6}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
            Cell::Inf => "inf".to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => json!(v),
            Cell::Int(v) => json!(v),
            Cell::Text(s) => json!(s),
            Cell::Empty => Value::Null,
            Cell::Inf => json!("inf"),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
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

impl From<Option<usize>> for Cell {
    fn from(v: Option<usize>) -> Self {
        v.map_or(Cell::Empty, Cell::from)
    }
}

impl From<scldpcl::de::QValue> for Cell {
    fn from(q: scldpcl::de::QValue) -> Self {
        q.finite().map_or(Cell::Inf, Cell::from)
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn csv(&self, manifest: &RunManifest) -> String {
        let mut s = manifest.header();
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn json(&self, manifest: &RunManifest) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| (c.clone(), v.json()))
                    .collect::<serde_json::Map<_, _>>();
                Value::Object(obj)
            })
            .collect();
        json!({ "manifest": manifest, "rows": rows })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn render(self, table: &Table, manifest: &RunManifest) -> String {
        match self {
            Format::Csv => table.csv(manifest),
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&table.json(manifest)).expect("table serializes");
                s.push('\n');
                s
            }
        }
    }
}

/// Writes to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}
