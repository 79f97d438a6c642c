//! CSV tables, binary series export and series import.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use locstat_core::simulate::{StationarySample, TriangularPath};

/// A named CSV table; every cell is numeric except for optional string columns at the end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v}"),
            Cell::Int(v) => format!("{v}"),
            Cell::Text(s) => s.clone(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Int(v) => Some(*v as f64),
            Cell::Text(s) => s.parse().ok(),
        }
    }
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j].as_f64().unwrap_or(f64::NAN)).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::render)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 csv")
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{}.csv", self.name)), self.to_csv())
    }
}

/// `t,u,x` for `t = 1..=n`.
pub fn path_table(path: &TriangularPath) -> Table {
    let mut t = Table::new("path", &["t", "u", "x"]);
    for (i, x) in path.values.iter().enumerate() {
        let s = i + 1;
        t.push(vec![s.into(), path.rescaled_time(s).into(), (*x).into()]);
    }
    t
}

/// `t,u,x[,d1[,d2]]`.
pub fn stationary_table(name: &str, s: &StationarySample) -> Table {
    let mut cols = vec!["t", "u", "x"];
    if s.d1.is_some() {
        cols.push("d1");
    }
    if s.d2.is_some() {
        cols.push("d2");
    }
    let mut t = Table::new(name, &cols);
    for i in 0..s.x.len() {
        let mut row: Vec<Cell> = vec![(s.t_first + i as i64).into(), s.u.into(), s.x[i].into()];
        if let Some(d) = &s.d1 {
            row.push(d[i].into());
        }
        if let Some(d) = &s.d2 {
            row.push(d[i].into());
        }
        t.push(row);
    }
    t
}

/// Little-endian `u64` length followed by the `f64` values.
pub fn write_binary(path: &Path, values: &[f64]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(8 + 8 * values.len());
    buf.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)
}

pub fn read_binary(path: &Path) -> std::io::Result<Vec<f64>> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let bad = || std::io::Error::new(std::io::ErrorKind::InvalidData, "truncated binary series");
    let len = u64::from_le_bytes(bytes.get(..8).ok_or_else(bad)?.try_into().unwrap()) as usize;
    if bytes.len() != 8 + 8 * len {
        return Err(bad());
    }
    Ok(bytes[8..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

/// Reads a series from CSV: the column named `x` if there is one, otherwise the first column.
pub fn read_series_csv(path: &Path) -> Result<Vec<f64>, SeriesError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = r.headers()?.clone();
    let (col, skip_header) = match headers.iter().position(|h| h.trim() == "x") {
        Some(j) => (j, true),
        None => (0, headers.get(0).map(|h| h.trim().parse::<f64>().is_err()).unwrap_or(true)),
    };
    let mut out = Vec::new();
    if !skip_header {
        out.push(headers[col].trim().parse()?);
    }
    for rec in r.records() {
        let rec = rec?;
        let cell = rec.get(col).ok_or(SeriesError::Shape)?;
        out.push(cell.trim().parse()?);
    }
    Ok(out)
}

#[derive(Debug, thiserror::Error)]
pub enum SeriesError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("non-numeric cell: {0}")]
    Parse(#[from] std::num::ParseFloatError),
    #[error("row without the selected column")]
    Shape,
}
