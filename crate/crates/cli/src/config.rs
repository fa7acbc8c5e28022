//! TOML experiment configuration with range checks and a resolved echo.

use crate::error::{CliError, CliResult};
use mfcomm::fields::{GridMeasure, GridSpec};
use mfcomm::RieszParams;
use serde_json::{json, Map, Value};
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

/// Radius in units of `sigma` where a Gaussian falls below `1e-12` of its peak.
const GAUSSIAN_REACH: f64 = 7.5;

const SECTIONS: [&str; 5] = ["kernel", "grid", "measure", "experiment", "output"];

/// Parsed configuration. Every lookup records the resolved value, so the
/// echo contains defaults as well as explicit keys.
#[derive(Debug)]
pub struct Config {
    path: PathBuf,
    table: toml::Table,
    used: BTreeSet<(String, String)>,
    echo: BTreeMap<String, Map<String, Value>>,
}

fn json_f64(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(x.to_string())
    }
}

impl Config {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> CliResult<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::config(format!("{}: {}", path.display(), e.to_string().trim_end())))?;
        let cfg = Self { path: path.to_path_buf(), table, used: BTreeSet::new(), echo: BTreeMap::new() };
        for (name, value) in &cfg.table {
            if !SECTIONS.contains(&name.as_str()) {
                return Err(cfg.error(format!("unknown section `{name}`; expected one of {}", SECTIONS.join(", "))));
            }
            if !value.is_table() {
                return Err(cfg.error(format!("`{name}` must be a table, e.g. [{name}]")));
            }
        }
        Ok(cfg)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn error(&self, msg: impl std::fmt::Display) -> CliError {
        CliError::config(format!("{}: {msg}", self.path.display()))
    }

    fn raw(&mut self, section: &str, key: &str) -> Option<toml::Value> {
        let v = self.table.get(section)?.as_table()?.get(key)?.clone();
        self.used.insert((section.into(), key.into()));
        Some(v)
    }

    fn record(&mut self, section: &str, key: &str, v: Value) {
        self.echo.entry(section.into()).or_default().insert(key.into(), v);
    }

    /// Records a value that did not come from the file, e.g. a CLI override.
    pub fn note(&mut self, section: &str, key: &str, v: Value) {
        self.record(section, key, v);
    }

    fn missing(&self, section: &str, key: &str) -> CliError {
        self.error(format!("missing required key `{section}.{key}`"))
    }

    fn as_f64(&self, section: &str, key: &str, v: &toml::Value) -> CliResult<f64> {
        match v {
            toml::Value::Float(x) => Ok(*x),
            toml::Value::Integer(i) => Ok(*i as f64),
            _ => Err(self.error(format!("`{section}.{key}` must be a number, got {v}"))),
        }
    }

    fn as_usize(&self, section: &str, key: &str, v: &toml::Value) -> CliResult<usize> {
        match v {
            toml::Value::Integer(i) if *i >= 0 => Ok(*i as usize),
            _ => Err(self.error(format!("`{section}.{key}` must be a nonnegative integer, got {v}"))),
        }
    }

    pub fn f64_opt(&mut self, section: &str, key: &str) -> CliResult<Option<f64>> {
        let Some(v) = self.raw(section, key) else { return Ok(None) };
        let x = self.as_f64(section, key, &v)?;
        self.record(section, key, json_f64(x));
        Ok(Some(x))
    }

    pub fn f64_req(&mut self, section: &str, key: &str) -> CliResult<f64> {
        self.f64_opt(section, key)?.ok_or_else(|| self.missing(section, key))
    }

    pub fn f64_or(&mut self, section: &str, key: &str, default: f64) -> CliResult<f64> {
        let x = self.f64_opt(section, key)?.unwrap_or(default);
        self.record(section, key, json_f64(x));
        Ok(x)
    }

    /// Number that must be strictly positive.
    pub fn positive_or(&mut self, section: &str, key: &str, default: f64) -> CliResult<f64> {
        let x = self.f64_or(section, key, default)?;
        if !(x > 0.0) {
            return Err(self.error(format!("`{section}.{key}` = {x} violates {key} > 0")));
        }
        Ok(x)
    }

    pub fn usize_opt(&mut self, section: &str, key: &str) -> CliResult<Option<usize>> {
        let Some(v) = self.raw(section, key) else { return Ok(None) };
        let n = self.as_usize(section, key, &v)?;
        self.record(section, key, json!(n));
        Ok(Some(n))
    }

    pub fn usize_req(&mut self, section: &str, key: &str) -> CliResult<usize> {
        self.usize_opt(section, key)?.ok_or_else(|| self.missing(section, key))
    }

    pub fn usize_or(&mut self, section: &str, key: &str, default: usize) -> CliResult<usize> {
        let n = self.usize_opt(section, key)?.unwrap_or(default);
        self.record(section, key, json!(n));
        Ok(n)
    }

    pub fn u64_opt(&mut self, section: &str, key: &str) -> CliResult<Option<u64>> {
        Ok(self.usize_opt(section, key)?.map(|n| n as u64))
    }

    pub fn bool_or(&mut self, section: &str, key: &str, default: bool) -> CliResult<bool> {
        let b = match self.raw(section, key) {
            Some(toml::Value::Boolean(b)) => b,
            Some(v) => return Err(self.error(format!("`{section}.{key}` must be true or false, got {v}"))),
            None => default,
        };
        self.record(section, key, json!(b));
        Ok(b)
    }

    pub fn str_or(&mut self, section: &str, key: &str, default: &str) -> CliResult<String> {
        let s = match self.raw(section, key) {
            Some(toml::Value::String(s)) => s,
            Some(v) => return Err(self.error(format!("`{section}.{key}` must be a string, got {v}"))),
            None => default.to_string(),
        };
        self.record(section, key, json!(s));
        Ok(s)
    }

    /// String restricted to `choices`.
    pub fn choice_or(&mut self, section: &str, key: &str, choices: &[&str], default: &str) -> CliResult<String> {
        let s = self.str_or(section, key, default)?;
        if !choices.contains(&s.as_str()) {
            return Err(self.error(format!("`{section}.{key}` = \"{s}\" must be one of {}", choices.join(", "))));
        }
        Ok(s)
    }

    fn list(&mut self, section: &str, key: &str) -> CliResult<Option<Vec<toml::Value>>> {
        Ok(self.raw(section, key).map(|v| match v {
            toml::Value::Array(a) => a,
            other => vec![other],
        }))
    }

    /// Number or array of numbers.
    pub fn f64_list_or(&mut self, section: &str, key: &str, default: &[f64]) -> CliResult<Vec<f64>> {
        let xs = match self.list(section, key)? {
            Some(vals) => vals.iter().map(|v| self.as_f64(section, key, v)).collect::<CliResult<Vec<_>>>()?,
            None => default.to_vec(),
        };
        self.record(section, key, Value::Array(xs.iter().map(|&x| json_f64(x)).collect()));
        Ok(xs)
    }

    pub fn f64_list_opt(&mut self, section: &str, key: &str) -> CliResult<Option<Vec<f64>>> {
        if self.table.get(section).and_then(|t| t.get(key)).is_none() {
            return Ok(None);
        }
        self.f64_list_or(section, key, &[]).map(Some)
    }

    /// Array of equal-length numeric arrays, e.g. particle positions.
    pub fn f64_rows_opt(&mut self, section: &str, key: &str, width: usize) -> CliResult<Option<Vec<Vec<f64>>>> {
        let Some(vals) = self.list(section, key)? else { return Ok(None) };
        let mut rows = Vec::with_capacity(vals.len());
        for v in &vals {
            let row = match v {
                toml::Value::Array(a) => a.iter().map(|x| self.as_f64(section, key, x)).collect::<CliResult<Vec<_>>>()?,
                other => return Err(self.error(format!("`{section}.{key}` must be an array of arrays, got {other}"))),
            };
            if row.len() != width {
                return Err(self.error(format!("`{section}.{key}` rows must have {width} entries, got {}", row.len())));
            }
            rows.push(row);
        }
        self.record(section, key, json!(rows));
        Ok(Some(rows))
    }

    /// Integer or array of integers.
    pub fn usize_list_req(&mut self, section: &str, key: &str) -> CliResult<Vec<usize>> {
        let vals = self.list(section, key)?.ok_or_else(|| self.missing(section, key))?;
        let ns = vals.iter().map(|v| self.as_usize(section, key, v)).collect::<CliResult<Vec<_>>>()?;
        self.record(section, key, json!(ns));
        Ok(ns)
    }

    pub fn usize_list_or(&mut self, section: &str, key: &str, default: &[usize]) -> CliResult<Vec<usize>> {
        if self.table.get(section).and_then(|t| t.get(key)).is_none() {
            self.record(section, key, json!(default));
            return Ok(default.to_vec());
        }
        self.usize_list_req(section, key)
    }

    pub fn str_list_or(&mut self, section: &str, key: &str, default: &[&str]) -> CliResult<Vec<String>> {
        let xs = match self.list(section, key)? {
            Some(vals) => vals
                .into_iter()
                .map(|v| match v {
                    toml::Value::String(s) => Ok(s),
                    other => Err(self.error(format!("`{section}.{key}` entries must be strings, got {other}"))),
                })
                .collect::<CliResult<Vec<_>>>()?,
            None => default.iter().map(|s| s.to_string()).collect(),
        };
        self.record(section, key, json!(xs));
        Ok(xs)
    }

    /// Rejects keys that no lookup consumed.
    pub fn finish(&self) -> CliResult<()> {
        for (name, section) in &self.table {
            for key in section.as_table().into_iter().flat_map(|t| t.keys()) {
                if !self.used.contains(&(name.clone(), key.clone())) {
                    return Err(self.error(format!("unknown key `{name}.{key}` for this command")));
                }
            }
        }
        Ok(())
    }

    pub fn echo(&self) -> Value {
        Value::Object(self.echo.iter().map(|(k, v)| (k.clone(), Value::Object(v.clone()))).collect())
    }

    /// `[kernel] d, s` with `-2 < s < d`.
    pub fn kernel(&mut self) -> CliResult<RieszParams> {
        let d = self.usize_req("kernel", "d")?;
        if !(1..=3).contains(&d) {
            return Err(self.error(format!("`kernel.d` = {d} violates d in {{1, 2, 3}}")));
        }
        let s = self.f64_req("kernel", "s")?;
        if !(s > -2.0 && s < d as f64) {
            return Err(self.error(format!("`kernel.s` = {s} violates -2 < s < d (d = {d})")));
        }
        Ok(RieszParams::new(d, s)?)
    }

    /// `[grid] n, L, padding`.
    pub fn grid(&mut self, d: usize) -> CliResult<GridSpec> {
        let n = self.usize_or("grid", "n", default_grid_n(d))?;
        let l = self.positive_or("grid", "L", 16.0)?;
        let padding = self.usize_or("grid", "padding", 2)?;
        Ok(GridSpec::with_padding(d, n, l, padding)?)
    }

    /// `[measure] shape, width`: a centered Gaussian or smooth bump.
    pub fn measure(&mut self, spec: GridSpec) -> CliResult<GridMeasure> {
        let shape = self.choice_or("measure", "shape", &["gaussian", "bump"], "gaussian")?;
        let width = self.positive_or("measure", "width", 0.3)?;
        let reach = if shape == "gaussian" { GAUSSIAN_REACH * width } else { width };
        if reach > spec.active_half_width() {
            return Err(self.error(format!(
                "`measure.width` = {width} violates {} width <= L/(2 padding) = {}",
                reach / width,
                spec.active_half_width()
            )));
        }
        let mu = match shape.as_str() {
            "gaussian" => GridMeasure::from_fn(spec, |x| (-x.iter().map(|c| c * c).sum::<f64>() / (2.0 * width * width)).exp())?,
            _ => GridMeasure::from_fn(spec, |x| {
                let r2 = x.iter().map(|c| c * c).sum::<f64>() / (width * width);
                if r2 < 1.0 {
                    (1.0 - r2).powi(3)
                } else {
                    0.0
                }
            })?,
        };
        Ok(mu)
    }
}

pub fn default_grid_n(d: usize) -> usize {
    match d {
        1 => 1024,
        2 => 256,
        _ => 64,
    }
}
