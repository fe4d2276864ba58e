//! Result tables, file emission and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::config::Format;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
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

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Num(v) => write!(f, "{v}"),
            Cell::Text(v) => f.write_str(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, c) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{c}");
            }
            out.push('\n');
        }
        out
    }

    /// Rows as objects keyed by column name.
    fn to_json(&self) -> Value {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let obj: Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(r)
                    .map(|(k, c)| (k.clone(), serde_json::to_value(c).expect("cell")))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        Value::Array(rows)
    }
}

/// What a subcommand produced.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub summary: Map<String, Value>,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn set(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("summary value");
        self.summary.insert(key.to_string(), v);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub seed: u64,
    pub format: Format,
    /// Fully resolved configuration, defaults included.
    pub config: Map<String, Value>,
    pub config_sha256: String,
    pub files: Vec<FileRecord>,
    pub summary: Map<String, Value>,
    pub wall_clock_seconds: f64,
}

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

pub fn file_stem(subcommand: &str) -> String {
    subcommand.replace('-', "_")
}

/// Write the report in `format` under `dir`; returns the records of the files written.
pub fn write_report(
    dir: &Path,
    subcommand: &str,
    format: Format,
    report: &Report,
) -> Result<Vec<FileRecord>, CliError> {
    fs::create_dir_all(dir)?;
    let stem = file_stem(subcommand);
    let mut outputs: Vec<(String, Vec<u8>)> = Vec::new();
    match format {
        Format::Csv => {
            for t in &report.tables {
                outputs.push((format!("{stem}_{}.csv", t.name), t.to_csv().into_bytes()));
            }
            let mut summary = Table::new("summary", &["key", "value"]);
            for (k, v) in &report.summary {
                let text = match v {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                summary.push(vec![k.as_str().into(), text.into()]);
            }
            outputs.push((format!("{stem}_summary.csv"), summary.to_csv().into_bytes()));
        }
        Format::Json => {
            let tables: Map<String, Value> = report.tables.iter().map(|t| (t.name.clone(), t.to_json())).collect();
            let doc = serde_json::json!({
                "subcommand": subcommand,
                "summary": report.summary,
                "tables": tables,
            });
            let mut text = serde_json::to_string_pretty(&doc).expect("json");
            text.push('\n');
            outputs.push((format!("{stem}.json"), text.into_bytes()));
        }
    }
    let mut records = Vec::with_capacity(outputs.len());
    for (name, bytes) in outputs {
        fs::write(dir.join(&name), &bytes)?;
        records.push(FileRecord {
            sha256: sha256_hex(&bytes),
            bytes: bytes.len() as u64,
            path: name,
        });
    }
    Ok(records)
}

pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<PathBuf, CliError> {
    let path = dir.join(MANIFEST_NAME);
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest");
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest, CliError> {
    let text = fs::read_to_string(dir.join(MANIFEST_NAME))?;
    serde_json::from_str(&text).map_err(|e| CliError::Check(format!("manifest does not parse: {e}")))
}
