//! Deterministic CSV emission for reports.
//!
//! Floats are written with nine significant digits in plain decimal notation
//! (scientific only for extreme magnitudes), so re-running a pipeline with the
//! same seed reproduces report files byte for byte.

use std::path::Path;

use crate::error::{ensure_arg, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum CsvValue {
    Int(i128),
    Float(f64),
    Str(String),
}

impl From<i64> for CsvValue {
    fn from(v: i64) -> Self {
        CsvValue::Int(v as i128)
    }
}

impl From<u64> for CsvValue {
    fn from(v: u64) -> Self {
        CsvValue::Int(v as i128)
    }
}

impl From<usize> for CsvValue {
    fn from(v: usize) -> Self {
        CsvValue::Int(v as i128)
    }
}

impl From<f64> for CsvValue {
    fn from(v: f64) -> Self {
        CsvValue::Float(v)
    }
}

impl From<&str> for CsvValue {
    fn from(v: &str) -> Self {
        CsvValue::Str(v.to_owned())
    }
}

impl From<String> for CsvValue {
    fn from(v: String) -> Self {
        CsvValue::Str(v)
    }
}

/// Formats with nine significant digits.
///
/// The decimal count is chosen from the magnitude: 30.0 -> "30.0000000",
/// 0.5 -> "0.500000000". Values whose magnitude would need more than 17
/// decimals or none at all past 10^17 fall back to scientific notation.
pub fn format_float(v: f64) -> String {
    debug_assert!(v.is_finite());
    if v == 0.0 {
        return "0.00000000".to_owned();
    }
    let mag = v.abs().log10().floor() as i32;
    if !(-9..=17).contains(&mag) {
        return format!("{v:.8e}");
    }
    let decimals = (8 - mag).clamp(0, 17) as usize;
    format!("{v:.decimals$}")
}

fn escape(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_owned()
    }
}

/// A rectangular table with a fixed header, the unit every report CSV in this
/// crate goes through.
#[derive(Debug, Clone)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<CsvValue>>,
}

impl Table {
    pub fn new<I, S>(columns: I) -> Result<Table>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let columns: Vec<String> = columns.into_iter().map(Into::into).collect();
        ensure_arg!(!columns.is_empty(), "a table needs at least one column");
        Ok(Table {
            columns,
            rows: Vec::new(),
        })
    }

    pub fn push_row(&mut self, row: Vec<CsvValue>) -> Result<()> {
        ensure_arg!(
            row.len() == self.columns.len(),
            "row has {} fields, header has {}",
            row.len(),
            self.columns.len()
        );
        for (i, v) in row.iter().enumerate() {
            if let CsvValue::Float(f) = v {
                ensure_arg!(f.is_finite(), "column {} has non-finite value {f}", self.columns[i]);
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(
            &self
                .columns
                .iter()
                .map(|c| escape(c))
                .collect::<Vec<_>>()
                .join(","),
        );
        out.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = row
                .iter()
                .map(|v| match v {
                    CsvValue::Int(i) => i.to_string(),
                    CsvValue::Float(f) => format_float(*f),
                    CsvValue::Str(s) => escape(s),
                })
                .collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}
