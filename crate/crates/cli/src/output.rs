//! CSV artifacts and the run manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

/// Fixed float formatting: shortest round-trip digits, in exponent form
/// outside [1e-4, 1e15).
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if x == 0.0 || (1e-4..1e15).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// An in-memory CSV table written in one go.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn with_header(name: &str, header: Vec<String>) -> Self {
        Self { name: name.into(), header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ArtifactRecord {
    pub file: String,
    pub rows: usize,
    pub columns: Vec<String>,
}

pub fn write_table(dir: &Path, table: &Table) -> std::io::Result<ArtifactRecord> {
    let path = dir.join(&table.name);
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(&path)?;
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(ArtifactRecord { file: table.name.clone(), rows: table.rows.len(), columns: table.header.clone() })
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub qdyn1d: &'static str,
    pub qdyn1d_core: &'static str,
    pub arch: &'static str,
    pub os: &'static str,
}

/// Everything needed to trace an artifact row back to its inputs.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub experiment: String,
    /// The resolved configuration, defaults included.
    pub config: Value,
    pub versions: Versions,
    pub seed: u64,
    pub threads: usize,
    pub artifacts: Vec<ArtifactRecord>,
    pub diagnostics: Value,
    pub wall_time_s: f64,
}

pub fn versions() -> Versions {
    Versions {
        qdyn1d: env!("CARGO_PKG_VERSION"),
        qdyn1d_core: qdyn1d_core::VERSION,
        arch: std::env::consts::ARCH,
        os: std::env::consts::OS,
    }
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> std::io::Result<PathBuf> {
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(manifest).map_err(std::io::Error::other)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}
