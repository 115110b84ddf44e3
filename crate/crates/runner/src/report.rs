//! CSV reports with `#` comment headers and footers.

use std::fmt::Display;

/// Twelve significant digits; `NaN` for missing cells.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.11e}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsvReport {
    header: Vec<String>,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
    footer: Vec<String>,
}

impl CsvReport {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Self {
            header: Vec::new(),
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            rows: Vec::new(),
            footer: Vec::new(),
        }
    }

    pub fn comment(&mut self, key: &str, value: impl Display) {
        self.header.push(format!("{key}: {value}"));
    }

    pub fn footer(&mut self, key: &str, value: impl Display) {
        self.footer.push(format!("{key}: {value}"));
    }

    /// Panics if the cell count differs from the column count.
    pub fn row(&mut self, cells: Vec<String>) {
        assert_eq!(cells.len(), self.columns.len(), "row width must match the header");
        self.rows.push(cells);
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for line in &self.header {
            out.extend_from_slice(format!("# {line}\n").as_bytes());
        }
        {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(&mut out);
            w.write_record(&self.columns).expect("in-memory write");
            for r in &self.rows {
                w.write_record(r).expect("in-memory write");
            }
            w.flush().expect("in-memory write");
        }
        for line in &self.footer {
            out.extend_from_slice(format!("# {line}\n").as_bytes());
        }
        out
    }
}
