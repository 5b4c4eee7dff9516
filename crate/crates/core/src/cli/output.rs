//! Data tables and the files a run writes: CSV (or its JSON mirror), a
//! gnuplot script and a `key=value` manifest.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::config::OutputFormat;

/// One table entry.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    /// Unbounded value, written as `inf`.
    Inf,
    /// Absent value, written as `nan`.
    Missing,
    Flag(bool),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) if v.is_nan() => "nan".into(),
            Cell::Num(v) if v.is_infinite() => if *v > 0.0 { "inf" } else { "-inf" }.into(),
            // 9 significant digits; -0 prints as 0
            Cell::Num(v) => format!("{:.8e}", if *v == 0.0 { 0.0 } else { *v }),
            Cell::Inf => "inf".into(),
            Cell::Missing => "nan".into(),
            Cell::Flag(b) => u8::from(*b).to_string(),
            Cell::Text(t) => t.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) if v.is_finite() => {
                let v = if *v == 0.0 { 0.0 } else { *v };
                // same rounding as the CSV
                let rounded: f64 = format!("{v:.8e}").parse().unwrap_or(v);
                json!(rounded)
            }
            Cell::Num(v) if v.is_infinite() => json!(if *v > 0.0 { "inf" } else { "-inf" }),
            Cell::Num(_) | Cell::Missing => Value::Null,
            Cell::Inf => json!("inf"),
            Cell::Flag(b) => json!(b),
            Cell::Text(t) => json!(t),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Num)
    }
}

/// Column-labelled table; each column carries a one-line description that
/// is written as a `#` header comment.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub title: String,
    pub columns: Vec<(String, String)>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, title: &str, columns: &[(&str, &str)]) -> Self {
        Self {
            name: name.to_owned(),
            title: title.to_owned(),
            columns: columns
                .iter()
                .map(|(n, d)| ((*n).to_owned(), (*d).to_owned()))
                .collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch in {}", self.name);
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|(n, _)| n == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.title);
        for (name, doc) in &self.columns {
            let _ = writeln!(out, "# {name}: {doc}");
        }
        let header: Vec<&str> = self.columns.iter().map(|(n, _)| n.as_str()).collect();
        let _ = writeln!(out, "{}", header.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn to_json(&self) -> Value {
        json!({
            "name": self.name,
            "title": self.title,
            "columns": self.columns.iter().map(|(n, d)| json!({"name": n, "description": d})).collect::<Vec<_>>(),
            "rows": self.rows.iter().map(|r| r.iter().map(Cell::json).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }
}

/// Everything one command produces.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureBundle {
    /// File stem shared by all outputs.
    pub name: String,
    /// First table is the primary one; others get `<name>_<suffix>` stems.
    pub tables: Vec<Table>,
    pub plot: String,
    pub manifest: Vec<(String, String)>,
}

impl FigureBundle {
    fn table_stem(&self, table: &Table, idx: usize) -> String {
        if idx == 0 {
            self.name.clone()
        } else {
            format!("{}_{}", self.name, table.name)
        }
    }

    /// Write all files into `outdir` and return their paths.
    pub fn write(&self, outdir: &Path, format: OutputFormat, timestamp: u64) -> io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(outdir)?;
        let mut written = Vec::new();
        for (idx, table) in self.tables.iter().enumerate() {
            let stem = self.table_stem(table, idx);
            let (path, body) = match format {
                OutputFormat::Csv => (outdir.join(format!("{stem}.csv")), table.to_csv()),
                OutputFormat::Json => {
                    let mut text = serde_json::to_string_pretty(&table.to_json()).map_err(io::Error::other)?;
                    text.push('\n');
                    (outdir.join(format!("{stem}.json")), text)
                }
            };
            std::fs::write(&path, body)?;
            written.push(path);
        }
        let plt = outdir.join(format!("{}.plt", self.name));
        std::fs::write(&plt, &self.plot)?;
        written.push(plt);
        let manifest = outdir.join(format!("{}.manifest", self.name));
        std::fs::write(&manifest, self.manifest_text(timestamp))?;
        written.push(manifest);
        Ok(written)
    }

    pub fn manifest_text(&self, timestamp: u64) -> String {
        let mut out = String::new();
        for (k, v) in &self.manifest {
            let _ = writeln!(out, "{k}={v}");
        }
        for (idx, table) in self.tables.iter().enumerate() {
            let _ = writeln!(out, "# {}.rows={}", self.table_stem(table, idx), table.rows.len());
        }
        let _ = writeln!(out, "generated_at={timestamp}");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new("t", "demo", &[("x", "abscissa"), ("y", "value")]);
        t.push(vec![Cell::Num(-0.0), Cell::Num(1.0)]);
        t.push(vec![Cell::Num(123.456789012), Cell::Inf]);
        t.push(vec![Cell::Num(f64::NAN), Cell::from(None)]);
        t
    }

    #[test]
    fn csv_layout() {
        let csv = sample().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# demo");
        assert_eq!(lines[1], "# x: abscissa");
        assert_eq!(lines[3], "x,y");
        assert_eq!(lines[4], "0.00000000e0,1.00000000e0");
        assert_eq!(lines[5], "1.23456789e2,inf");
        assert_eq!(lines[6], "nan,nan");
        assert!(csv.ends_with('\n') && !csv.contains('\r'));
    }

    #[test]
    fn json_mirrors_csv() {
        let j = sample().to_json();
        assert_eq!(j["rows"][1][0], json!(123.456789));
        assert_eq!(j["rows"][1][1], json!("inf"));
        assert_eq!(j["rows"][2][1], Value::Null);
        assert_eq!(j["columns"][1]["name"], json!("y"));
    }

    #[test]
    fn bundle_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut extra = sample();
        extra.name = "mse".into();
        let bundle = FigureBundle {
            name: "fig9".into(),
            tables: vec![sample(), extra],
            plot: "plot 1\n".into(),
            manifest: vec![("figure".into(), "9".into())],
        };
        let files = bundle.write(dir.path(), OutputFormat::Csv, 42).unwrap();
        let names: Vec<String> = files
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, ["fig9.csv", "fig9_mse.csv", "fig9.plt", "fig9.manifest"]);
        let manifest = std::fs::read_to_string(dir.path().join("fig9.manifest")).unwrap();
        assert!(manifest.contains("figure=9\n"));
        assert!(manifest.contains("generated_at=42\n"));
    }
}
