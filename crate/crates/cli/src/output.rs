use std::fmt::Write as _;

use clap::ValueEnum;
use lakelet_core::kv::Record;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Tab-separated with a header row.
    Tsv,
    /// One `key=value` record per line.
    Lines,
}

/// Rows of a command's output. An empty table prints nothing, header
/// included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| (*h).to_owned()).collect(),
            rows: Vec::new(),
        }
    }

    /// Parse a tab-separated block whose first line is the header.
    pub fn from_tsv(text: &str) -> Self {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default().split('\t').map(str::to_owned).collect();
        Self {
            header,
            rows: lines.map(|l| l.split('\t').map(str::to_owned).collect()).collect(),
        }
    }

    /// Panics if the row width differs from the header.
    pub fn push<I, S>(&mut self, row: I)
    where
        I: IntoIterator<Item = S>,
        S: ToString,
    {
        let row: Vec<String> = row.into_iter().map(|c| c.to_string()).collect();
        assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self, format: Format) -> String {
        let mut out = String::new();
        if self.rows.is_empty() {
            return out;
        }
        match format {
            Format::Tsv => {
                let _ = writeln!(out, "{}", self.header.join("\t"));
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(|c| c.replace(['\t', '\n'], " ")).collect();
                    let _ = writeln!(out, "{}", cells.join("\t"));
                }
            }
            Format::Lines => {
                for row in &self.rows {
                    let mut rec = Record::new();
                    for (k, v) in self.header.iter().zip(row) {
                        rec.push(k, v);
                    }
                    let _ = writeln!(out, "{}", rec.to_line());
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_prints_nothing() {
        let t = Table::new(&["a", "b"]);
        assert_eq!(t.render(Format::Tsv), "");
        assert_eq!(t.render(Format::Lines), "");
    }

    #[test]
    fn tsv_and_lines() {
        let mut t = Table::new(&["id", "note"]);
        t.push(["1", "two\twords"]);
        assert_eq!(t.render(Format::Tsv), "id\tnote\n1\ttwo words\n");
        assert_eq!(t.render(Format::Lines), "id=1\tnote=two\\twords\n");
    }

    #[test]
    fn round_trips_tsv_blocks() {
        let t = Table::from_tsv("x\ty\n1\t2\n3\t4\n");
        assert_eq!(t.len(), 2);
        assert_eq!(t.render(Format::Tsv), "x\ty\n1\t2\n3\t4\n");
    }
}
