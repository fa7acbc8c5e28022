//! Report files: CSV tables and the JSON summary.

use crate::error::{CliError, CliResult};
use serde_json::{Map, Value};
use std::path::{Path, PathBuf};

/// Float cell with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// A CSV table; rows are pre-formatted cells.
#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Output directory and enabled formats.
#[derive(Debug)]
pub struct Output {
    pub dir: PathBuf,
    pub csv: bool,
    pub json: bool,
    pub files: Vec<String>,
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

impl Output {
    pub fn new(dir: PathBuf, formats: &[String]) -> CliResult<Self> {
        let mut out = Self { dir, csv: false, json: false, files: Vec::new() };
        for f in formats {
            match f.trim() {
                "csv" => out.csv = true,
                "json" => out.json = true,
                other => return Err(CliError::config(format!("unknown output format `{other}`; use csv, json"))),
            }
        }
        Ok(out)
    }

    pub fn prepare(&self) -> CliResult<()> {
        std::fs::create_dir_all(&self.dir).map_err(io_error(&self.dir))
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_csv(&mut self, name: &str, table: &Table) -> CliResult<()> {
        if !self.csv {
            return Ok(());
        }
        let path = self.path(name);
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)
            .map_err(|e| CliError::Io { path: path.display().to_string(), source: e.into() })?;
        let to_io = |e: csv::Error| CliError::Io { path: path.display().to_string(), source: e.into() };
        w.write_record(&table.columns).map_err(to_io)?;
        for row in &table.rows {
            w.write_record(row).map_err(to_io)?;
        }
        w.flush().map_err(io_error(&path))?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Runs a writer from the core crate when CSV output is enabled.
    pub fn write_with(&mut self, name: &str, f: impl FnOnce(&Path) -> std::io::Result<()>) -> CliResult<()> {
        if !self.csv {
            return Ok(());
        }
        let path = self.path(name);
        f(&path).map_err(io_error(&path))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &Value) -> CliResult<()> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
        text.push('\n');
        std::fs::write(&path, text).map_err(io_error(&path))?;
        self.files.push(name.to_string());
        Ok(())
    }
}

/// Command results collected for the JSON summary.
#[derive(Debug, Default)]
pub struct Summary {
    pub results: Map<String, Value>,
    pub fitted: Map<String, Value>,
    pub warnings: Vec<String>,
}

impl Summary {
    pub fn result(&mut self, key: &str, v: impl serde::Serialize) {
        self.results.insert(key.into(), to_value(v));
    }

    pub fn fitted(&mut self, key: &str, v: impl serde::Serialize) {
        self.fitted.insert(key.into(), to_value(v));
    }
}

/// JSON value; non-finite floats become null.
pub fn to_value(v: impl serde::Serialize) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}
