use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, CliResult};

/// A CSV table written with shortest round-trip float formatting.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Table {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        w.write_record(&self.header).map_err(|e| csv_err(path, e))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| CliError::io(path, e))
    }
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    CliError::Other(format!("{}: {e}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Other(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[derive(Serialize)]
pub struct Manifest<'a> {
    pub kind: &'a str,
    pub version: &'a str,
    pub seed: u64,
    pub workers: usize,
    pub wall_time_seconds: f64,
    pub outputs: Vec<String>,
    pub spec: serde_json::Value,
}

/// Output directory for one run, created on demand.
pub struct OutDir {
    pub dir: PathBuf,
    pub written: Vec<String>,
}

impl OutDir {
    pub fn create(dir: PathBuf) -> CliResult<Self> {
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(OutDir { dir, written: Vec::new() })
    }

    pub fn table(&mut self, name: &str, t: &Table) -> CliResult<()> {
        t.write(&self.dir.join(name))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, v: &T) -> CliResult<()> {
        write_json(&self.dir.join(name), v)?;
        self.written.push(name.to_string());
        Ok(())
    }
}
