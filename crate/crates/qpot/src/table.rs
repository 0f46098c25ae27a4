//! Delimited-text tables and plain-text run manifests.
//!
//! Both formats are deliberately primitive: tab-separated values with one
//! header line, and `key = value` lines grouped under `[section]` headers.
//! They diff cleanly, parse with any text tooling, and round-trip through
//! this module byte for byte, which is what lets a rerun from an emitted
//! manifest be compared against the original output with `cmp`.

use std::fmt::Write as _;
use std::path::Path;

use crate::{QpotError, Result};

/// A named table: one header row and any number of data rows, all cells
/// stored as strings so that formatting decisions happen exactly once, at
/// insertion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    name: String,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

/// Canonical cell text for a float: shortest digits that round-trip. Two
/// equal floats always format identically, which keeps emitted tables
/// byte-stable across runs.
pub fn cell(x: f64) -> String {
    format!("{x}")
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Result<Self> {
        let name = name.into();
        let columns: Vec<String> = columns.iter().map(|c| c.to_string()).collect();
        if columns.is_empty() {
            return Err(QpotError::Domain(format!(
                "table {name} needs at least one column"
            )));
        }
        for c in &columns {
            check_cell(c)?;
        }
        Ok(Table {
            name,
            columns,
            rows: Vec::new(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn push_row(&mut self, cells: Vec<String>) -> Result<()> {
        if cells.len() != self.columns.len() {
            return Err(QpotError::Domain(format!(
                "table {} expects {} cells per row, got {}",
                self.name,
                self.columns.len(),
                cells.len()
            )));
        }
        for c in &cells {
            check_cell(c)?;
        }
        self.rows.push(cells);
        Ok(())
    }

    /// The full tab-separated text: header line, then one line per row.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join("\t"));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join("\t"));
            out.push('\n');
        }
        out
    }

    /// Parse tab-separated text produced by [`Table::to_tsv`]. The table
    /// name is supplied by the caller (usually the file stem).
    pub fn parse_tsv(name: impl Into<String>, text: &str) -> Result<Self> {
        let name = name.into();
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| QpotError::Parse(format!("table {name} is empty")))?;
        let columns: Vec<String> = header.split('\t').map(str::to_string).collect();
        let mut table = Table {
            name: name.clone(),
            columns,
            rows: Vec::new(),
        };
        for (k, line) in lines.enumerate() {
            let cells: Vec<String> = line.split('\t').map(str::to_string).collect();
            if cells.len() != table.columns.len() {
                return Err(QpotError::Parse(format!(
                    "table {name} row {} has {} cells, header has {}",
                    k + 1,
                    cells.len(),
                    table.columns.len()
                )));
            }
            table.rows.push(cells);
        }
        Ok(table)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_tsv())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("table")
            .to_string();
        let text = std::fs::read_to_string(path)
            .map_err(|e| QpotError::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::parse_tsv(name, &text)
    }

    /// Position of a named column.
    pub fn column_index(&self, column: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == column)
            .ok_or_else(|| {
                QpotError::Parse(format!(
                    "table {} has no column {column} (columns: {})",
                    self.name,
                    self.columns.join(", ")
                ))
            })
    }
}

fn check_cell(c: &str) -> Result<()> {
    if c.contains('\t') || c.contains('\n') {
        return Err(QpotError::Domain(format!(
            "cell {c:?} contains a delimiter character"
        )));
    }
    Ok(())
}

/// An ordered list of `[section]` blocks, each an ordered list of
/// `key = value` pairs. Order is preserved exactly so the text form is
/// reproducible.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    sections: Vec<(String, Vec<(String, String)>)>,
}

impl Manifest {
    pub fn new() -> Self {
        Manifest::default()
    }

    pub fn push_section(
        &mut self,
        name: impl Into<String>,
        entries: Vec<(String, String)>,
    ) -> Result<()> {
        let name = name.into();
        if name.is_empty() || name.contains(']') || name.contains('\n') {
            return Err(QpotError::Domain(format!("bad section name {name:?}")));
        }
        for (k, v) in &entries {
            if k.is_empty() || k.contains('=') || k.contains('\n') || k.trim() != k {
                return Err(QpotError::Domain(format!("bad manifest key {k:?}")));
            }
            if v.contains('\n') || v.trim() != v {
                return Err(QpotError::Domain(format!(
                    "manifest value for {k} must be a single trimmed line"
                )));
            }
        }
        self.sections.push((name, entries));
        Ok(())
    }

    pub fn section(&self, name: &str) -> Option<&[(String, String)]> {
        self.sections
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, e)| e.as_slice())
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.section(section)?
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, (name, entries)) in self.sections.iter().enumerate() {
            if k > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "[{name}]");
            for (key, value) in entries {
                let _ = writeln!(out, "{key} = {value}");
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut manifest = Manifest::new();
        let mut current: Option<(String, Vec<(String, String)>)> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim_end();
            if line.is_empty() {
                continue;
            }
            if let Some(inner) = line.strip_prefix('[') {
                let name = inner.strip_suffix(']').ok_or_else(|| {
                    QpotError::Parse(format!("line {}: unterminated section header", lineno + 1))
                })?;
                if let Some((n, e)) = current.take() {
                    manifest.push_section(n, e)?;
                }
                current = Some((name.to_string(), Vec::new()));
            } else if let Some((key, value)) = line.split_once(" = ") {
                let entries = match current.as_mut() {
                    Some((_, e)) => e,
                    None => {
                        return Err(QpotError::Parse(format!(
                            "line {}: entry before any [section] header",
                            lineno + 1
                        )))
                    }
                };
                entries.push((key.to_string(), value.to_string()));
            } else {
                return Err(QpotError::Parse(format!(
                    "line {}: expected `[section]` or `key = value`, got {line:?}",
                    lineno + 1
                )));
            }
        }
        if let Some((n, e)) = current.take() {
            manifest.push_section(n, e)?;
        }
        Ok(manifest)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| QpotError::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trips_byte_for_byte() {
        let mut t = Table::new("caps", &["radius", "capacity"]).unwrap();
        t.push_row(vec![cell(0.5), cell(12.117)]).unwrap();
        t.push_row(vec![cell(0.25), cell(3.0312)]).unwrap();
        let text = t.to_tsv();
        let back = Table::parse_tsv("caps", &text).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_tsv(), text);
    }

    #[test]
    fn float_cells_are_shortest_round_trip() {
        assert_eq!(cell(0.5), "0.5");
        assert_eq!(cell(1.0 / 3.0), "0.3333333333333333");
        let x = 12.117234987_f64;
        assert_eq!(cell(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn row_arity_is_enforced() {
        let mut t = Table::new("t", &["a", "b"]).unwrap();
        assert!(t.push_row(vec!["1".into()]).is_err());
        assert!(t.push_row(vec!["1".into(), "2".into(), "3".into()]).is_err());
        assert!(t.push_row(vec!["1".into(), "2".into()]).is_ok());
    }

    #[test]
    fn delimiters_rejected_inside_cells() {
        let mut t = Table::new("t", &["a"]).unwrap();
        assert!(t.push_row(vec!["x\ty".into()]).is_err());
        assert!(t.push_row(vec!["x\ny".into()]).is_err());
    }

    #[test]
    fn ragged_rows_rejected_at_parse() {
        let err = Table::parse_tsv("t", "a\tb\n1\t2\t3\n").unwrap_err();
        assert!(matches!(err, QpotError::Parse(_)));
    }

    #[test]
    fn manifest_round_trips_byte_for_byte() {
        let mut m = Manifest::new();
        m.push_section(
            "config",
            vec![
                ("command".into(), "capacity".into()),
                ("resolution".into(), "41".into()),
                ("domain_radius".into(), "1".into()),
            ],
        )
        .unwrap();
        m.push_section("timing", vec![("wall_seconds".into(), "7.5".into())])
            .unwrap();
        let text = m.to_text();
        let back = Manifest::parse(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_text(), text);
        assert_eq!(back.get("config", "resolution"), Some("41"));
        assert_eq!(back.get("timing", "wall_seconds"), Some("7.5"));
    }

    #[test]
    fn manifest_rejects_stray_entries_and_bad_lines() {
        assert!(Manifest::parse("key = value\n").is_err());
        assert!(Manifest::parse("[s]\nthis is not an entry\n").is_err());
        assert!(Manifest::parse("[unterminated\n").is_err());
    }

    #[test]
    fn manifest_section_lookup_misses_cleanly() {
        let m = Manifest::parse("[a]\nx = 1\n").unwrap();
        assert_eq!(m.get("a", "x"), Some("1"));
        assert_eq!(m.get("a", "y"), None);
        assert_eq!(m.get("b", "x"), None);
    }
}
