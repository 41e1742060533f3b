use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};

use crate::CliError;

/// One long-format CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.to_string(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }
}

/// Everything a subcommand produces.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub tables: Vec<Table>,
    /// Extra JSON artifacts `(file stem, document)`.
    pub documents: Vec<(String, Value)>,
    pub summary: Value,
}

/// Shortest round-trip float formatting; stable across runs and platforms.
pub fn num(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x:e}")
    }
}

pub struct RunInfo<'a> {
    pub command: &'a str,
    pub config: Value,
    pub seed: Option<u64>,
    pub workers: usize,
    pub wall_time_s: f64,
}

/// Write the CSV tables, JSON documents and `manifest.json`.
pub fn write_report(report: &Report, dir: &Path, info: &RunInfo) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut outputs = Vec::new();
    for t in &report.tables {
        let path = dir.join(format!("{}.csv", t.name));
        std::fs::write(&path, t.to_csv()?)?;
        outputs.push(json!({ "file": format!("{}.csv", t.name), "columns": t.header, "rows": t.rows.len() }));
        written.push(path);
    }
    for (name, doc) in &report.documents {
        let path = dir.join(format!("{name}.json"));
        std::fs::write(&path, serde_json::to_string_pretty(doc).expect("json") + "\n")?;
        outputs.push(json!({ "file": format!("{name}.json") }));
        written.push(path);
    }
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let manifest = json!({
        "command": info.command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": info.config,
        "seed": info.seed,
        "workers": info.workers,
        "outputs": outputs,
        "summary": report.summary,
        "wall_time_s": info.wall_time_s,
        "finished_unix": started,
    });
    let path = dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest).expect("json") + "\n")?;
    written.push(path);
    Ok(written)
}

pub fn write_error(dir: &Path, err: &CliError) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("error.json"), serde_json::to_string_pretty(&err.to_json()).expect("json") + "\n")
}
