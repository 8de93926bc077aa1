//! CSV emission. Floating-point fields carry 17 significant digits so that
//! values round-trip exactly; every row repeats the configuration and the
//! library version.

use std::collections::HashMap;
use std::io::{Read, Write};

use crate::error::{BenchError, Result};

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn fmt_opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// A CSV table held in memory before it is written.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        String::from_utf8(buf).map_err(|e| BenchError::Record(e.to_string()))
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec?.iter().map(str::to_string).collect());
        }
        Ok(Self { header, rows })
    }

    /// Rows as column-name lookups.
    pub fn named_rows(&self) -> Vec<HashMap<&str, &str>> {
        self.rows
            .iter()
            .map(|row| self.header.iter().map(String::as_str).zip(row.iter().map(String::as_str)).collect())
            .collect()
    }
}

pub(crate) fn field<'a>(row: &HashMap<&str, &'a str>, name: &str) -> Result<&'a str> {
    row.get(name).copied().ok_or_else(|| BenchError::Record(format!("missing column '{name}'")))
}

pub(crate) fn parse_field<T: std::str::FromStr>(row: &HashMap<&str, &str>, name: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = field(row, name)?;
    raw.parse().map_err(|e| BenchError::Record(format!("column '{name}' = '{raw}': {e}")))
}

pub(crate) fn parse_opt<T: std::str::FromStr>(row: &HashMap<&str, &str>, name: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match field(row, name)? {
        "" => Ok(None),
        _ => parse_field(row, name).map(Some),
    }
}
