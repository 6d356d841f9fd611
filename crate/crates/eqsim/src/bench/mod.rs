//! Benchmarks behind the CLI and their tabular output.

pub mod object;
pub mod plot;
pub mod rsp;
pub mod scale;

use std::io::{self, Write};

use crate::codec::BenchRow;

/// Rows of one benchmark with a fixed column schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| *h == name)
    }

    pub fn write_csv(&self, out: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Space-aligned text for terminals.
    pub fn write_text(&self, mut out: impl Write) -> io::Result<()> {
        let mut widths: Vec<usize> = self.header.iter().map(|h| h.len()).collect();
        for r in &self.rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        let line = |cells: Vec<&str>| {
            cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect::<Vec<_>>().join("  ")
        };
        writeln!(out, "{}", line(self.header.clone()))?;
        for r in &self.rows {
            writeln!(out, "{}", line(r.iter().map(String::as_str).collect()))?;
        }
        Ok(())
    }
}

/// Fixed-precision float formatting so identical runs give identical CSV.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.6}")
}

pub fn codec_table(rows: &[BenchRow]) -> Table {
    let mut t = Table::new(&["engine", "ratio", "compress_MBps", "decompress_MBps"]);
    for r in rows {
        t.push(vec![
            r.info.id.name.to_string(),
            fmt_f64(r.info.ratio),
            fmt_f64(r.info.compress_speed / 1e6),
            fmt_f64(r.info.decompress_speed / 1e6),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_text_agree() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["1".into(), "x,y".into()]);
        let mut csv = Vec::new();
        t.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap(), "a,b\n1,\"x,y\"\n");
        let mut text = Vec::new();
        t.write_text(&mut text).unwrap();
        assert_eq!(String::from_utf8(text).unwrap(), "a    b\n1  x,y\n");
    }
}
