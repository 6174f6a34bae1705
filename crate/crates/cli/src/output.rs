//! Tabular output and the metadata sidecar.

use std::io::Write;
use std::time::Duration;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::args::Format;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Flag(bool),
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            // shortest round-trip form, with an exponent for tiny or huge values
            Cell::Num(v) => write!(f, "{v:?}"),
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Text(s) => f.write_str(s),
            Cell::Flag(b) => write!(f, "{b}"),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Flag(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// Fixed header plus rows; CSV or a JSON array of row objects.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    /// Column printed bare for a single-row result.
    pub primary: Option<usize>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
            primary: None,
        }
    }

    pub fn with_primary(mut self, column: &str) -> Self {
        self.primary = self.header.iter().position(|h| *h == column);
        self
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "{}", self.header.join(","))?;
        for r in &self.rows {
            let line: Vec<String> = r.iter().map(Cell::to_string).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| {
                    let m: Map<String, Value> = self
                        .header
                        .iter()
                        .zip(r)
                        .map(|(h, c)| (h.to_string(), serde_json::to_value(c).unwrap_or(Value::Null)))
                        .collect();
                    Value::Object(m)
                })
                .collect(),
        )
    }
}

/// What a command produced.
pub enum Artifact {
    Table(Table),
    /// A structured report; CSV output uses the table form.
    Report { json: Value, table: Table },
}

impl Artifact {
    pub fn render(&self, format: Format) -> Result<Vec<u8>, CliError> {
        let mut buf = Vec::new();
        match (self, format) {
            (Artifact::Table(t) | Artifact::Report { table: t, .. }, Format::Csv) => t.write_csv(&mut buf)?,
            (Artifact::Table(t), Format::Json) => {
                serde_json::to_writer_pretty(&mut buf, &t.to_json()).map_err(std::io::Error::other)?;
                buf.push(b'\n');
            }
            (Artifact::Report { json, .. }, Format::Json) => {
                serde_json::to_writer_pretty(&mut buf, json).map_err(std::io::Error::other)?;
                buf.push(b'\n');
            }
        }
        Ok(buf)
    }

    /// A single number, printed bare when no output file is requested.
    pub fn scalar(&self) -> Option<f64> {
        match self {
            Artifact::Table(t) if t.rows.len() == 1 => match t.primary.map(|i| &t.rows[0][i]) {
                Some(Cell::Num(v)) => Some(*v),
                _ => None,
            },
            _ => None,
        }
    }
}

pub fn sidecar_path(output: &str) -> String {
    format!("{output}.meta.json")
}

pub fn metadata(command: &str, config: &Value, seed: Option<u64>, wall: Duration) -> Value {
    json!({
        "command": command,
        "config": config,
        "seed": seed,
        "version": besqlab::VERSION,
        "cli_version": env!("CARGO_PKG_VERSION"),
        "wall_time_seconds": wall.as_secs_f64(),
    })
}
