//! Tabular output: RFC-4180 CSV with a header row, or a JSON array of
//! objects with fields in header order.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde_json::{Map, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.header.len(), "row does not match the table schema");
        self.rows.push(row);
    }
}

/// Exact integers travel as decimal strings.
pub fn int(v: impl ToString) -> Value {
    Value::String(v.to_string())
}

/// Non-finite floats become null.
pub fn real(v: f64) -> Value {
    serde_json::Number::from_f64(v).map(Value::Number).unwrap_or(Value::Null)
}

pub fn text(v: impl Into<String>) -> Value {
    Value::String(v.into())
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn render(table: &Table, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
            w.write_record(&table.header)?;
            for row in &table.rows {
                w.write_record(row.iter().map(cell))?;
            }
            Ok(w.into_inner().map_err(|e| e.into_error())?)
        }
        Format::Json => {
            let items: Vec<Value> = table
                .rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> =
                        table.header.iter().zip(row).map(|(k, v)| (k.to_string(), v.clone())).collect();
                    Value::Object(obj)
                })
                .collect();
            let mut out = serde_json::to_vec_pretty(&Value::Array(items))?;
            out.push(b'\n');
            Ok(out)
        }
    }
}

pub fn write(table: &Table, format: Format, out: Option<&Path>) -> Result<()> {
    let bytes = render(table, format)?;
    match out {
        Some(path) => {
            let mut f = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
            f.write_all(&bytes)?;
        }
        None => io::stdout().lock().write_all(&bytes)?,
    }
    Ok(())
}
