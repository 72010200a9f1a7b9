//! JSON summaries, CSV tables and the acceptance report.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::RunConfig;
use crate::error::CliError;

pub const SCHEMA_VERSION: &str = "fbn-cli/1";

/// One quantitative check: |measured − target| ≤ tolerance (absolute or
/// relative), or a one-sided bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub target: f64,
    pub measured: f64,
    pub tolerance: f64,
    /// "relative", "absolute", "below" (measured < target − tolerance) or
    /// "at-most" (measured ≤ target).
    pub kind: String,
    /// How the measured value was obtained.
    pub method: String,
    pub pass: bool,
}

impl Check {
    pub fn relative(name: &str, target: f64, measured: f64, tolerance: f64, method: &str) -> Self {
        let pass = ((measured - target) / target).abs() <= tolerance;
        Self::build(name, target, measured, tolerance, "relative", method, pass)
    }

    pub fn absolute(name: &str, target: f64, measured: f64, tolerance: f64, method: &str) -> Self {
        let pass = (measured - target).abs() <= tolerance;
        Self::build(name, target, measured, tolerance, "absolute", method, pass)
    }

    pub fn below(name: &str, bound: f64, measured: f64, margin: f64, method: &str) -> Self {
        let pass = measured < bound - margin;
        Self::build(name, bound, measured, margin, "below", method, pass)
    }

    pub fn at_most(name: &str, bound: f64, measured: f64, method: &str) -> Self {
        let pass = measured <= bound;
        Self::build(name, bound, measured, 0.0, "at-most", method, pass)
    }

    fn build(name: &str, target: f64, measured: f64, tolerance: f64, kind: &str, method: &str, pass: bool) -> Self {
        Self { name: name.into(), target, measured, tolerance, kind: kind.into(), method: method.into(), pass }
    }
}

/// Column-named numeric table.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Io(e.to_string());
        w.write_record(&self.columns).map_err(io)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| format!("{v:e}"))).map_err(io)?;
        }
        String::from_utf8(w.into_inner().map_err(|e| CliError::Io(e.to_string()))?).map_err(|e| CliError::Io(e.to_string()))
    }
}

/// Result of one pipeline.
pub struct Output {
    pub results: Value,
    pub checks: Vec<Check>,
    pub table: Option<Table>,
}

#[derive(Serialize)]
struct Document<'a> {
    schema: &'static str,
    command: &'a str,
    config: &'a RunConfig,
    results: &'a Value,
    checks: &'a [Check],
}

pub fn render_json(command: &str, config: &RunConfig, out: &Output) -> Result<String, CliError> {
    let doc = Document { schema: SCHEMA_VERSION, command, config, results: &out.results, checks: &out.checks };
    serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))
}

/// Writes `<command>.json` and, when present, `<command>.csv` (prefixed by
/// the schema line and the config as comments).
pub fn write_files(dir: &Path, command: &str, config: &RunConfig, out: &Output, json: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(format!("{command}.json")), format!("{json}\n"))?;
    if let Some(t) = &out.table {
        let cfg = serde_json::to_string(config).map_err(|e| CliError::Io(e.to_string()))?;
        let text = format!("# schema: {SCHEMA_VERSION}\n# config: {cfg}\n{}", t.to_csv()?);
        fs::write(dir.join(format!("{command}.csv")), text)?;
    }
    Ok(())
}

/// Collects the checks of every `*.json` summary in `dir` (in name order)
/// and writes `report.txt`. Fails without writing if there is nothing to report.
pub fn emit_report(dir: &Path) -> Result<String, CliError> {
    let mut files: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let mut lines = Vec::new();
    for f in &files {
        let doc: Value = serde_json::from_str(&fs::read_to_string(f)?).map_err(|e| CliError::Io(format!("{}: {e}", f.display())))?;
        if doc.get("schema").and_then(Value::as_str) != Some(SCHEMA_VERSION) {
            continue;
        }
        let command = doc.get("command").and_then(Value::as_str).unwrap_or("?").to_string();
        let checks: Vec<Check> = serde_json::from_value(doc.get("checks").cloned().unwrap_or(Value::Null)).unwrap_or_default();
        for c in checks {
            lines.push(format!(
                "{:<14} {:<34} target {:>13.6e}  measured {:>13.6e}  tol {:>9.2e} ({:<8}) {}",
                command,
                c.name,
                c.target,
                c.measured,
                c.tolerance,
                c.kind,
                if c.pass { "PASS" } else { "FAIL" }
            ));
        }
    }
    if lines.is_empty() {
        return Err(CliError::Io(format!("no results to report in {}", dir.display())));
    }
    let passed = lines.iter().filter(|l| l.ends_with("PASS")).count();
    let text = format!("{}\n{passed}/{} checks passed\n", lines.join("\n"), lines.len());
    fs::write(dir.join("report.txt"), &text)?;
    Ok(text)
}
