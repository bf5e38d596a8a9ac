//! Manifest-first result directory and CSV tables.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::Config;

/// A CSV table; rows are sorted before writing so parallel producers cannot
/// change the bytes on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    /// Sort by the first columns numerically where possible.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            for (x, y) in a.iter().zip(b) {
                let ord = match (x.parse::<f64>(), y.parse::<f64>()) {
                    (Ok(p), Ok(q)) => p.total_cmp(&q),
                    _ => x.cmp(y),
                };
                if ord != std::cmp::Ordering::Equal {
                    return ord;
                }
            }
            std::cmp::Ordering::Equal
        });
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(self.file_name());
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(path)
    }
}

/// Shortest round-trip decimal form.
pub fn num(v: f64) -> String {
    format!("{v}")
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    threads: Option<usize>,
    outputs: &'a [String],
    config: &'a Config,
}

pub struct OutputDir {
    dir: PathBuf,
}

impl OutputDir {
    /// Creates the directory and writes `manifest.json` before any result.
    pub fn create(dir: &Path, command: &str, config: &Config, outputs: &[String], threads: Option<usize>) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let manifest = Manifest {
            tool: "mbmimo",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed: config.seeds.master,
            threads,
            outputs,
            config,
        };
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        fs::write(dir.join("manifest.json"), text)?;
        Ok(OutputDir { dir: dir.to_path_buf() })
    }

    pub fn write(&self, table: &Table) -> Result<PathBuf> {
        let mut t = table.clone();
        t.sort();
        t.write(&self.dir)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (zero for a single value).
    pub std: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Summary { mean: f64::NAN, std: f64::NAN, n };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Summary { mean, std, n }
    }

    pub fn stderr(&self) -> f64 {
        self.std / (self.n as f64).sqrt()
    }
}
