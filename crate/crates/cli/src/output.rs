//! Run directory: CSV tables and JSON documents plus a manifest written last.

use crate::error::CliError;
use serde::Serialize;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

pub enum Cell {
    F(f64),
    I(i64),
    S(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            // 17 significant digits round-trip every f64
            Cell::F(v) => format!("{v:.16e}"),
            Cell::I(v) => v.to_string(),
            Cell::S(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v as i64)
    }
}

impl From<i32> for Cell {
    fn from(v: i32) -> Self {
        Cell::I(v as i64)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::S(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.into())
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::F)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub name: String,
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub columns: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
}

pub struct RunDir {
    root: PathBuf,
    seed: u64,
    files: Vec<FileRecord>,
}

impl RunDir {
    pub fn create(root: &Path, seed: u64) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::Io(format!("{}: {e}", root.display())))?;
        Ok(RunDir { root: root.to_path_buf(), seed, files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// CSV with a leading `seed` column.
    pub fn table(&mut self, name: &str, columns: &[&str], rows: Vec<Vec<Cell>>) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(self.root.join(name))?;
        let header: Vec<String> = std::iter::once("seed").chain(columns.iter().copied()).map(String::from).collect();
        w.write_record(&header)?;
        let seed = self.seed.to_string();
        for row in &rows {
            if row.len() != columns.len() {
                return Err(CliError::Io(format!("{name}: row has {} cells, header {}", row.len(), columns.len())));
            }
            w.write_record(std::iter::once(seed.clone()).chain(row.iter().map(Cell::render)))?;
        }
        w.flush()?;
        self.files.push(FileRecord { name: name.into(), kind: "csv", columns: header, rows: Some(rows.len()) });
        Ok(())
    }

    /// JSON object with the seed inserted.
    pub fn json(&mut self, name: &str, mut value: Value) -> Result<(), CliError> {
        if let Value::Object(map) = &mut value {
            map.insert("seed".into(), json!(self.seed));
        } else {
            value = json!({ "seed": self.seed, "value": value });
        }
        std::fs::write(self.root.join(name), serde_json::to_string_pretty(&value)? + "\n")?;
        self.files.push(FileRecord { name: name.into(), kind: "json", columns: Vec::new(), rows: None });
        Ok(())
    }

    pub fn manifest(&self, subcommand: &str, config: Value, status: &str, notes: &[String], extra: Value) -> Result<(), CliError> {
        let manifest = json!({
            "schema_version": SCHEMA_VERSION,
            "tool": "maglab",
            "versions": {
                "maglab-cli": env!("CARGO_PKG_VERSION"),
                "maglab-core": maglab_core::VERSION,
            },
            "subcommand": subcommand,
            "seed": self.seed,
            "status": status,
            "config": config,
            "files": self.files,
            "notes": notes,
            "summary": extra,
        });
        std::fs::write(self.root.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(())
    }
}
