//! Result files. Everything but `record.json` is a deterministic function
//! of the config.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// Float format for tables: 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// A CSV table with a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    header: Vec<String>,
    rows: Vec<String>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Append a row of already formatted cells.
    pub fn row(&mut self, cells: Vec<String>) {
        assert_eq!(cells.len(), self.header.len(), "{}: row width", self.name);
        self.rows.push(cells.join(","));
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(r);
            s.push('\n');
        }
        s
    }
}

/// What an experiment produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: serde_json::Value,
    pub tables: Vec<Table>,
}

impl Outcome {
    pub fn new(summary: impl Serialize) -> Result<Self> {
        Ok(Self {
            summary: serde_json::to_value(summary)?,
            tables: Vec::new(),
        })
    }

    pub fn with(mut self, table: Table) -> Self {
        self.tables.push(table);
        self
    }
}

/// Write `contents` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .map_err(|e| e.error)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Per-run provenance.
#[derive(Debug, Clone, Serialize)]
pub struct ResultRecord {
    pub config_hash: String,
    pub version: String,
    pub kind: String,
    pub outputs: Vec<String>,
    pub wall_seconds: f64,
}

/// Write the summary, tables and config; return the file names.
pub fn write_outcome(dir: &Path, outcome: &Outcome, config_toml: &str) -> Result<Vec<String>> {
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: &[u8]| -> Result<()> {
        write_atomic(&dir.join(name), bytes)?;
        written.push(name.to_string());
        Ok(())
    };
    put("config.toml", config_toml.as_bytes())?;
    let mut summary = serde_json::to_string_pretty(&outcome.summary)?;
    summary.push('\n');
    put("summary.json", summary.as_bytes())?;
    for t in &outcome.tables {
        put(&format!("{}.csv", t.name), t.render().as_bytes())?;
    }
    Ok(written)
}

pub fn write_record(dir: &Path, record: &ResultRecord) -> Result<PathBuf> {
    let path = dir.join("record.json");
    let mut s = serde_json::to_string_pretty(record)?;
    s.push('\n');
    write_atomic(&path, s.as_bytes())?;
    Ok(path)
}
