//! CSV tables, gnuplot scripts and run manifests, written atomically.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// A CSV file. Column names carry their unit in brackets, `[-]` for
/// dimensionless quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width in {}", self.name);
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    /// Index of the column whose name starts with `prefix`.
    pub fn column(&self, prefix: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == prefix || c.starts_with(&format!("{prefix}[")))
    }

    /// Numeric values of one column; non-numeric cells become NaN.
    pub fn values(&self, prefix: &str) -> Vec<f64> {
        let Some(j) = self.column(prefix) else {
            return Vec::new();
        };
        self.rows
            .iter()
            .map(|r| match &r[j] {
                Cell::Num(v) => *v,
                Cell::Int(v) => *v as f64,
                Cell::Text(_) => f64::NAN,
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            for (j, cell) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                match cell {
                    // shortest representation that round-trips
                    Cell::Num(v) => write!(out, "{v:e}").expect("write to string"),
                    Cell::Int(v) => write!(out, "{v}").expect("write to string"),
                    Cell::Text(s) => out.push_str(s),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Line plot of columns from one table, one curve per `y` column.
#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub name: String,
    pub title: String,
    pub table: String,
    /// 1-based gnuplot column numbers.
    pub x: usize,
    pub ys: Vec<usize>,
    pub log_x: bool,
    pub log_y: bool,
}

impl Plot {
    pub fn script(&self) -> String {
        let mut s = String::new();
        s.push_str("set datafile separator ','\n");
        s.push_str("set key autotitle columnhead\n");
        s.push_str("set terminal pngcairo size 900,600\n");
        let _ = writeln!(s, "set output '{}.png'", self.name);
        let _ = writeln!(s, "set title '{}'", self.title.replace('\'', ""));
        if self.log_x {
            s.push_str("set logscale x\n");
        }
        if self.log_y {
            s.push_str("set logscale y\n");
        }
        let curves: Vec<String> = self
            .ys
            .iter()
            .map(|y| format!("'{}.csv' using {}:{} with lines", self.table, self.x, y))
            .collect();
        let _ = writeln!(s, "plot {}", curves.join(", \\\n     "));
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub library_version: &'static str,
    pub rng: &'static str,
    pub kind: String,
    pub seeds: Vec<u64>,
    pub threads: Option<usize>,
    pub config: serde_json::Value,
    pub files: Vec<String>,
}

/// Write `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Write every table and plot script plus `manifest.json` into `dir`.
pub fn write_artifacts(dir: &Path, tables: &[Table], plots: &[Plot], manifest: &mut Manifest) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for t in tables {
        let path = dir.join(t.file_name());
        write_atomic(&path, t.to_csv().as_bytes())?;
        manifest.files.push(t.file_name());
        written.push(path);
    }
    for p in plots {
        let name = format!("{}.gp", p.name);
        let path = dir.join(&name);
        write_atomic(&path, p.script().as_bytes())?;
        manifest.files.push(name);
        written.push(path);
    }
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    write_atomic(&path, text.as_bytes())?;
    written.push(path);
    Ok(written)
}
