use std::io::Write;

use mushra_core::analysis::Tabular;
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// A flat result table. CSV and JSON renderings carry the same cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str], rows: Vec<Vec<String>>) -> Self {
        Table {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows,
        }
    }

    pub fn from_tabular<T: Tabular + ?Sized>(t: &T) -> Self {
        Table::new(&t.header(), t.rows())
    }

    pub fn write<W: Write>(&self, format: OutputFormat, out: W) -> Result<(), CliError> {
        match format {
            OutputFormat::Csv => self.write_csv(out),
            OutputFormat::Json => self.write_json(out),
        }
    }

    fn write_csv<W: Write>(&self, out: W) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header).map_err(mushra_core::Error::from)?;
        for row in &self.rows {
            w.write_record(row).map_err(mushra_core::Error::from)?;
        }
        w.flush().map_err(|e| CliError::Io(format!("writing output: {e}")))
    }

    fn write_json<W: Write>(&self, mut out: W) -> Result<(), CliError> {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .header
                    .iter()
                    .zip(row)
                    .map(|(h, cell)| (h.clone(), cell_value(cell)))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        serde_json::to_writer_pretty(&mut out, &rows).map_err(mushra_core::Error::from)?;
        out.write_all(b"\n")
            .map_err(|e| CliError::Io(format!("writing output: {e}")))
    }
}

/// Empty cells become null; cells that are the canonical rendering of a
/// finite number become numbers; everything else stays a string.
pub fn cell_value(cell: &str) -> Value {
    if cell.is_empty() {
        return Value::Null;
    }
    if let Ok(x) = cell.parse::<f64>() {
        if x.is_finite() && x.to_string() == cell {
            if let Some(n) = serde_json::Number::from_f64(x) {
                return Value::Number(n);
            }
        }
    }
    Value::String(cell.to_string())
}

/// Inverse of [`cell_value`], used to compare JSON output against CSV.
pub fn value_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Number(n) => n.as_f64().map(|x| x.to_string()).unwrap_or_default(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}
