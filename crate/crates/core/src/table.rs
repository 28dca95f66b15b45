//! Plain CSV emission for trajectories and scan tables.
//!
//! Floats are written with 17 significant digits so that every value
//! round-trips exactly through a text file.

use std::fmt::Write as _;

/// Formats `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Accumulates a header plus rows and renders them as CSV text.
#[derive(Debug, Clone)]
pub struct CsvTable {
    header: Vec<String>,
    body: String,
}

pub enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as u64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_owned())
    }
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            body: String::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.header.len()
    }

    /// Appends one row; panics if the row width differs from the header.
    pub fn push_row(&mut self, cells: impl IntoIterator<Item = Cell>) {
        let rendered: Vec<String> = cells
            .into_iter()
            .map(|c| match c {
                Cell::Float(x) => fmt_f64(x),
                Cell::Int(i) => i.to_string(),
                Cell::Text(s) => s,
            })
            .collect();
        assert_eq!(rendered.len(), self.header.len(), "csv row width mismatch");
        let _ = writeln!(self.body, "{}", rendered.join(","));
    }

    pub fn render(&self) -> String {
        format!("{}\n{}", self.header.join(","), self.body)
    }
}
