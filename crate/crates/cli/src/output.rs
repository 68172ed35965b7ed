//! Tabular result files in CSV and JSON.
//!
//! CSV layout: a `# qpulse-sim v<semver>` line, `# key: value` provenance
//! lines, the column header, then data rows. Floats are written as the
//! shortest decimal that parses back to the same bits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::Format;
use crate::{CliError, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Bool(bool),
    Num(f64),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Bool(_) => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Cell::Bool(b) => Some(*b),
            Cell::Num(_) => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub provenance: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { provenance: vec![], columns: columns.iter().map(|c| c.to_string()).collect(), rows: vec![] }
    }

    pub fn with_provenance(mut self, provenance: Vec<(String, String)>) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric values of one column.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.column_index(name)?;
        self.rows.iter().map(|r| r[j].as_f64()).collect()
    }

    /// Refuses NaN, naming the first offending cell.
    pub fn check_finite(&self) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                if let Cell::Num(v) = cell {
                    if v.is_nan() {
                        return Err(CliError::NanValue(format!(
                            "data row {}, column {:?}",
                            i + 1,
                            self.columns[j]
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn escape(value: &str) -> String {
    value.replace('\n', " ")
}

pub fn to_csv(table: &Table) -> Result<String> {
    table.check_finite()?;
    let mut s = format!("# qpulse-sim v{VERSION}\n");
    for (k, v) in &table.provenance {
        writeln!(s, "# {}: {}", k, escape(v)).unwrap();
    }
    writeln!(s, "{}", table.columns.join(",")).unwrap();
    for row in &table.rows {
        let cells: Vec<String> = row
            .iter()
            .map(|c| match c {
                Cell::Num(v) => format!("{v:?}"),
                Cell::Bool(b) => b.to_string(),
            })
            .collect();
        writeln!(s, "{}", cells.join(",")).unwrap();
    }
    Ok(s)
}

pub fn from_csv(text: &str) -> Result<Table> {
    let bad = |msg: String| CliError::Config(format!("csv: {msg}"));
    let mut lines = text.lines();
    match lines.next() {
        Some(l) if l.starts_with("# qpulse-sim v") => {}
        _ => return Err(bad("missing version line".into())),
    }
    let mut table = Table::default();
    let mut header = None;
    for (n, line) in lines.enumerate() {
        if header.is_none() {
            if let Some(rest) = line.strip_prefix("# ") {
                let (k, v) =
                    rest.split_once(": ").ok_or_else(|| bad(format!("line {}: bad provenance", n + 2)))?;
                table.provenance.push((k.to_string(), v.to_string()));
                continue;
            }
            header = Some(());
            table.columns = line.split(',').map(str::to_string).collect();
            continue;
        }
        let row = line
            .split(',')
            .map(|f| match f {
                "true" => Ok(Cell::Bool(true)),
                "false" => Ok(Cell::Bool(false)),
                _ => f
                    .parse::<f64>()
                    .map(Cell::Num)
                    .map_err(|_| bad(format!("line {}: bad number {f:?}", n + 2))),
            })
            .collect::<Result<Vec<_>>>()?;
        if row.len() != table.columns.len() {
            return Err(bad(format!("line {}: expected {} fields", n + 2, table.columns.len())));
        }
        table.rows.push(row);
    }
    if header.is_none() {
        return Err(bad("missing column header".into()));
    }
    Ok(table)
}

#[derive(Serialize, Deserialize)]
struct JsonDoc {
    generator: String,
    provenance: Vec<(String, String)>,
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

pub fn to_json(table: &Table) -> Result<String> {
    table.check_finite()?;
    if let Some((i, j)) = table.rows.iter().enumerate().find_map(|(i, r)| {
        r.iter().position(|c| matches!(c, Cell::Num(v) if v.is_infinite())).map(|j| (i, j))
    }) {
        return Err(CliError::Numerical(format!(
            "infinite value at data row {}, column {:?} cannot be stored as JSON",
            i + 1,
            table.columns[j]
        )));
    }
    let doc = JsonDoc {
        generator: format!("qpulse-sim v{VERSION}"),
        provenance: table.provenance.clone(),
        columns: table.columns.clone(),
        rows: table.rows.clone(),
    };
    Ok(serde_json::to_string_pretty(&doc).expect("table serializes") + "\n")
}

pub fn from_json(text: &str) -> Result<Table> {
    let doc: JsonDoc = serde_json::from_str(text).map_err(|e| CliError::Config(format!("json: {e}")))?;
    Ok(Table { provenance: doc.provenance, columns: doc.columns, rows: doc.rows })
}

/// Writes `<dir>/<stem>.<csv|json>` and returns the path.
pub fn write_table(dir: &Path, stem: &str, table: &Table, format: Format) -> Result<PathBuf> {
    let (text, ext) = match format {
        Format::Csv => (to_csv(table)?, "csv"),
        Format::Json => (to_json(table)?, "json"),
    };
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(format!("{stem}.{ext}"));
    fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => from_json(&text),
        _ => from_csv(&text),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new(&["x", "y", "ok"]).with_provenance(vec![("config_hash".into(), "abc".into())]);
        t.push(vec![0.1.into(), (1.0f64 / 3.0).into(), true.into()]);
        t.push(vec![1e-300.into(), (-2.5e17).into(), false.into()]);
        t
    }

    #[test]
    fn csv_layout() {
        let s = to_csv(&sample()).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], format!("# qpulse-sim v{VERSION}"));
        assert_eq!(lines[1], "# config_hash: abc");
        assert_eq!(lines[2], "x,y,ok");
        assert_eq!(lines[3], "0.1,0.3333333333333333,true");
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn both_formats_round_trip() {
        let t = sample();
        assert_eq!(from_csv(&to_csv(&t).unwrap()).unwrap(), t);
        assert_eq!(from_json(&to_json(&t).unwrap()).unwrap(), t);
    }

    #[test]
    fn nan_is_refused_with_location() {
        let mut t = sample();
        t.rows[1][1] = Cell::Num(f64::NAN);
        let err = to_csv(&t).unwrap_err();
        assert!(matches!(err, CliError::NanValue(_)));
        assert!(err.to_string().contains("row 2") && err.to_string().contains("\"y\""), "{err}");
        assert!(to_json(&t).is_err());
    }
}
