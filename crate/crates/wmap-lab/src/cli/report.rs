//! Result tables and their CSV/JSON renderings.
//!
//! Every task produces one or more named [`Table`]s collected in a
//! [`Report`]. CSV output writes one `<table>.csv` per table with floats at
//! 17 significant digits, so equal runs produce byte-identical files; the
//! JSON report additionally carries the echoed config, provenance, and
//! warnings. The timestamp lives only in the JSON, keeping CSVs stable.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::ser::{SerializeSeq, SerializeStruct};
use serde::{Serialize, Serializer};

/// A single table value.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    /// Not-applicable; rendered as an empty CSV field and JSON `null`.
    Empty,
}

impl Cell {
    /// CSV rendering; floats use scientific notation with 17 significant
    /// digits so values survive a round trip exactly.
    pub fn csv_field(&self) -> String {
        match self {
            Cell::Num(x) => format_num(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }
}

fn format_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let mut out = String::new();
    write!(out, "{x:.16e}").unwrap();
    out
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        match self {
            Cell::Num(x) if x.is_finite() => ser.serialize_f64(*x),
            // JSON has no NaN/inf; fall back to the CSV spelling.
            Cell::Num(x) => ser.serialize_str(&format_num(*x)),
            Cell::Int(i) => ser.serialize_i64(*i),
            Cell::Text(s) => ser.serialize_str(s),
            Cell::Bool(b) => ser.serialize_bool(*b),
            Cell::Empty => ser.serialize_none(),
        }
    }
}

/// A named rectangular table with a header row.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Appends a row; panics if the width disagrees with the header, since
    /// that is always a programming error in a task implementation.
    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch in {}", self.name);
        self.rows.push(row);
    }

    fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(&self.columns)?;
        for row in &self.rows {
            writer.write_record(row.iter().map(|c| c.csv_field()))?;
        }
        writer.flush()
    }
}

impl Serialize for Table {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        struct Rows<'a>(&'a [Vec<Cell>], &'a [String]);
        impl Serialize for Rows<'_> {
            fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
                let mut seq = ser.serialize_seq(Some(self.0.len()))?;
                for row in self.0 {
                    let map: std::collections::BTreeMap<&str, &Cell> = self
                        .1
                        .iter()
                        .map(String::as_str)
                        .zip(row.iter())
                        .collect();
                    seq.serialize_element(&map)?;
                }
                seq.end()
            }
        }
        let mut state = ser.serialize_struct("Table", 3)?;
        state.serialize_field("name", &self.name)?;
        state.serialize_field("columns", &self.columns)?;
        state.serialize_field("rows", &Rows(&self.rows, &self.columns))?;
        state.end()
    }
}

/// Reproducibility context attached to every JSON report.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub seed: u64,
    pub version: String,
    /// Seconds since the Unix epoch at run time; excluded from CSV output.
    pub timestamp: u64,
    pub threads: usize,
    pub chunk_size: usize,
}

impl Provenance {
    pub fn capture(seed: u64) -> Self {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Provenance {
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp,
            threads: crate::sample::configured_threads(),
            chunk_size: crate::sample::CHUNK_SIZE,
        }
    }
}

/// Everything a task run produced.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub task: String,
    pub config: serde_json::Value,
    pub provenance: Provenance,
    pub tables: Vec<Table>,
    pub warnings: Vec<String>,
}

/// Output formats selectable on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Parses a comma-separated format list such as `csv,json`.
pub fn parse_formats(text: &str) -> Result<Vec<Format>, String> {
    let mut formats = Vec::new();
    for token in text.split(',') {
        let format = match token.trim() {
            "csv" => Format::Csv,
            "json" => Format::Json,
            other => return Err(format!("unknown format {other:?}; expected csv or json")),
        };
        if !formats.contains(&format) {
            formats.push(format);
        }
    }
    if formats.is_empty() {
        return Err("no output format selected".into());
    }
    Ok(formats)
}

impl Report {
    /// Writes the selected formats into `out_dir` (created if needed) and
    /// returns the paths written: one CSV per table plus `report.json`.
    pub fn emit(&self, out_dir: &Path, formats: &[Format]) -> std::io::Result<Vec<PathBuf>> {
        fs::create_dir_all(out_dir)?;
        let mut written = Vec::new();
        if formats.contains(&Format::Csv) {
            for table in &self.tables {
                let path = out_dir.join(format!("{}.csv", table.name));
                table.write_csv(&path)?;
                written.push(path);
            }
        }
        if formats.contains(&Format::Json) {
            let path = out_dir.join("report.json");
            let mut text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
            text.push('\n');
            fs::write(&path, text)?;
            written.push(path);
        }
        Ok(written)
    }
}
