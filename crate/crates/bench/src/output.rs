//! CSV tables with a `#` metadata header, field files and the JSON manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ito_core::krotov::ControlField;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Columns whose values depend on the machine and are excluded from
/// determinism comparisons.
pub const TIMING_COLUMNS: [&str; 1] = ["wall_time_s"];

/// One output table, written to `<name>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// `(t, ε)` samples of a control field.
    pub fn field(name: impl Into<String>, field: &ControlField) -> Self {
        let mut t = Self::new(name, &["t", "epsilon"]);
        for (time, eps) in field.samples() {
            t.push(vec![num(time), num(eps)]);
        }
        t
    }

    /// The table without its timing columns.
    pub fn without_timing(&self) -> Table {
        let keep: Vec<usize> = (0..self.columns.len())
            .filter(|&i| !TIMING_COLUMNS.contains(&self.columns[i].as_str()))
            .collect();
        Table {
            name: self.name.clone(),
            columns: keep.iter().map(|&i| self.columns[i].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| keep.iter().map(|&i| r[i].clone()).collect())
                .collect(),
        }
    }
}

/// Shortest round-trip representation.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:e}")
    }
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map_or_else(String::new, num)
}

/// Header lines shared by every table of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub experiment: String,
    pub config_hash: String,
    pub code_version: String,
    pub seed: u64,
}

impl Header {
    pub fn of(cfg: &RunConfig) -> Self {
        Self {
            experiment: cfg.experiment.name().into(),
            config_hash: cfg.hash(),
            code_version: CODE_VERSION.into(),
            seed: cfg.seed,
        }
    }

    fn lines(&self) -> [(String, String); 4] {
        [
            ("config_hash".into(), self.config_hash.clone()),
            ("code_version".into(), self.code_version.clone()),
            ("seed".into(), self.seed.to_string()),
            ("experiment".into(), self.experiment.clone()),
        ]
    }
}

pub fn write_table(dir: &Path, header: &Header, table: &Table) -> Result<PathBuf> {
    let path = dir.join(format!("{}.csv", table.name));
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    for (k, v) in header.lines() {
        writeln!(out, "# {k}: {v}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(path)
}

/// Reads a table written by [`write_table`]: header entries and the data.
pub fn read_table(path: &Path) -> Result<(Vec<(String, String)>, Table)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let header = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .filter_map(|l| {
            let (k, v) = l.trim_start_matches('#').split_once(':')?;
            Some((k.trim().to_string(), v.trim().to_string()))
        })
        .collect();
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let columns = r.headers()?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| Ok(rec?.iter().map(str::to_string).collect()))
        .collect::<Result<Vec<Vec<String>>>>()?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok((header, Table { name, columns, rows }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub preset: String,
    pub seed: u64,
    pub config_hash: String,
    pub code_version: String,
    pub threads: usize,
    pub config_file: String,
    pub outputs: Vec<String>,
    pub cells: usize,
    pub failed_cells: usize,
    pub wall_time_s: f64,
    pub status: String,
    pub error: Option<String>,
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<PathBuf> {
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(manifest)?;
    std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
