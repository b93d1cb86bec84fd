//! Tables and their CSV and JSON encodings.
//!
//! CSV: header row, `,` separators, LF line endings, floats as `{:.16e}`
//! (17 significant digits, round-trip exact).

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::config::Format;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Bool(bool),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Bool(v) => v.to_string(),
        }
    }

    fn json(&self) -> Value {
        match *self {
            Cell::Int(v) => Value::from(v),
            Cell::Float(v) => serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number),
            Cell::Bool(v) => Value::Bool(v),
        }
    }
}

/// One experiment's rows at one level `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub k: u32,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(k: u32, header: &[&'static str]) -> Self {
        Self {
            k,
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    fn json_rows(&self) -> impl Iterator<Item = Value> + '_ {
        self.rows.iter().map(|row| {
            let mut obj = Map::new();
            obj.insert("k".into(), Value::from(self.k));
            for (name, cell) in self.header.iter().zip(row) {
                obj.insert((*name).into(), cell.json());
            }
            Value::Object(obj)
        })
    }
}

/// All tables as one JSON array of row objects, each tagged with `k`.
pub fn tables_to_json(tables: &[Table]) -> String {
    let rows: Vec<Value> = tables.iter().flat_map(Table::json_rows).collect();
    let mut s = serde_json::to_string_pretty(&Value::Array(rows)).expect("JSON values serialize");
    s.push('\n');
    s
}

/// `out_k50.csv` for `out.csv` and `k = 50`.
pub fn per_level_path(path: &Path, k: u32) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let name = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}_k{k}.{ext}"),
        None => format!("{stem}_k{k}"),
    };
    path.with_file_name(name)
}

/// Writes the tables; returns the paths written (empty for stdout).
pub fn emit(tables: &[Table], format: Format, out: Option<&Path>) -> Result<Vec<PathBuf>, String> {
    match (format, out) {
        (Format::Json, None) => {
            print_stdout(&tables_to_json(tables))?;
            Ok(Vec::new())
        }
        (Format::Json, Some(path)) => {
            write_file(path, &tables_to_json(tables))?;
            Ok(vec![path.to_path_buf()])
        }
        (Format::Csv, None) => match tables {
            [single] => {
                print_stdout(&single.to_csv())?;
                Ok(Vec::new())
            }
            _ => Err("several k values give several CSV tables; pass --out PATH (files PATH_k<k>.csv are written) or use --format json".into()),
        },
        (Format::Csv, Some(path)) => match tables {
            [single] => {
                write_file(path, &single.to_csv())?;
                Ok(vec![path.to_path_buf()])
            }
            _ => tables
                .iter()
                .map(|t| {
                    let p = per_level_path(path, t.k);
                    write_file(&p, &t.to_csv())?;
                    Ok(p)
                })
                .collect(),
        },
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), String> {
    std::fs::write(path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

pub fn print_stdout(contents: &str) -> Result<(), String> {
    let mut lock = std::io::stdout().lock();
    lock.write_all(contents.as_bytes())
        .and_then(|_| lock.flush())
        .map_err(|e| format!("cannot write to stdout: {e}"))
}
