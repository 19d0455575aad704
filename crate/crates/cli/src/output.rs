//! CSV and JSON artifacts.
//!
//! CSV files start with the effective configuration as `# `-prefixed TOML
//! lines, followed by a header row and one record per row. JSON files hold
//! `{config, seed, results}`. Floats use the shortest text that parses back
//! to the same value, so identical runs give identical bytes.

use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};

use crate::config::FlatConfig;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// A result table plus the richer JSON rendering of the same results.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub json: Value,
    /// Work units (grid cells) that failed at run time; recorded in the rows.
    pub failed_cells: usize,
}

pub fn float(v: f64) -> String {
    v.to_string()
}

/// JSON number, or a string for values JSON cannot represent.
pub fn json_float(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(v.to_string())
    }
}

pub fn json_floats(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| json_float(x)).collect())
}

pub fn render(report: &Report, config: &FlatConfig, format: Format) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Csv => render_csv(report, config),
        Format::Json => {
            let doc = json!({
                "config": config,
                "seed": config.seed,
                "results": report.json,
            });
            let mut out = serde_json::to_vec_pretty(&doc).map_err(|e| CliError::Runtime(e.to_string()))?;
            out.push(b'\n');
            Ok(out)
        }
    }
}

fn render_csv(report: &Report, config: &FlatConfig) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::new();
    for line in config.to_toml().lines() {
        writeln!(out, "# {line}").expect("writing to memory");
    }
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| CliError::Runtime(e.to_string());
    w.write_record(&report.columns).map_err(io)?;
    for row in &report.rows {
        w.write_record(row).map_err(io)?;
    }
    w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))
}

/// Writes to `path`, or stdout without one.
pub fn emit(bytes: &[u8], path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::Config(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Runtime(format!("stdout: {e}"))),
    }
}
