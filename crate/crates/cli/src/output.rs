//! Output directories: CSV tables, optional SVG previews and the metadata record.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};
use crate::svg::LinePlot;

/// A CSV table built in memory; cells are formatted on insertion so that
/// identical inputs always produce identical bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

/// One CSV cell.
pub enum Cell {
    F(f64),
    U(usize),
    S(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::U(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::F)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::S(v.to_string())
    }
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(
            row.len(),
            self.header.len(),
            "row width must match the header"
        );
        self.rows.push(
            row.into_iter()
                .map(|c| match c {
                    Cell::F(v) => format!("{v:e}"),
                    Cell::U(v) => v.to_string(),
                    Cell::S(s) => s,
                    Cell::Empty => String::new(),
                })
                .collect(),
        );
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(
            self.rows
                .iter()
                .map(|r| r[idx].parse().unwrap_or(f64::NAN))
                .collect(),
        )
    }

    pub fn to_csv_bytes(&self) -> CliResult<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| CliError::Output(e.to_string()))
    }
}

/// Collects the files of one run and writes `metadata.json` last.
pub struct OutputSet {
    dir: PathBuf,
    files: Vec<String>,
    notes: Vec<String>,
    svg: bool,
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    parameters: &'a Value,
    notes: &'a [String],
    files: &'a [String],
}

impl OutputSet {
    pub fn create(dir: impl Into<PathBuf>, svg: bool) -> CliResult<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(Self {
            dir,
            files: Vec::new(),
            notes: Vec::new(),
            svg,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_table(&mut self, name: &str, table: &Table) -> CliResult<()> {
        self.write_bytes(name, &table.to_csv_bytes()?)
    }

    /// Writes the SVG only when previews were requested.
    pub fn write_plot(&mut self, name: &str, plot: &LinePlot) -> CliResult<()> {
        if self.svg {
            self.write_bytes(name, plot.render().as_bytes())?;
        }
        Ok(())
    }

    pub fn write_jsonl<T: Serialize>(&mut self, name: &str, records: &[T]) -> CliResult<()> {
        let mut out = String::new();
        for r in records {
            out.push_str(&serde_json::to_string(r).map_err(|e| CliError::Output(e.to_string()))?);
            out.push('\n');
        }
        self.write_bytes(name, out.as_bytes())
    }

    /// Writes `metadata.json` and returns the list of data files.
    pub fn finish(self, command: &str, parameters: &impl Serialize) -> CliResult<Vec<String>> {
        let parameters =
            serde_json::to_value(parameters).map_err(|e| CliError::Output(e.to_string()))?;
        let meta = Metadata {
            tool: "covloc",
            version: env!("CARGO_PKG_VERSION"),
            command,
            parameters: &parameters,
            notes: &self.notes,
            files: &self.files,
        };
        let mut text =
            serde_json::to_string_pretty(&meta).map_err(|e| CliError::Output(e.to_string()))?;
        text.push('\n');
        let path = self.dir.join("metadata.json");
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(self.files)
    }
}
