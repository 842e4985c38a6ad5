//! Result tables with provenance columns, written as CSV or JSON, and the
//! PASS/FAIL criteria printed to standard output.

use std::fmt;
use std::io::Write;
use std::path::Path;

use serde_json::{Map, Value};

use super::config::{Format, RunConfig};
use crate::error::Result;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Cell {
        Cell::Text(s.into())
    }

    /// CSV rendering; floats in scientific notation with 17 significant digits.
    pub fn render(&self) -> String {
        match self {
            Cell::Float(x) if x.is_finite() => format!("{x:.16e}"),
            Cell::Float(x) if x.is_nan() => "NaN".into(),
            Cell::Float(x) => if *x > 0.0 { "inf" } else { "-inf" }.into(),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Float(x) => serde_json::Number::from_f64(*x)
                .map(Value::Number)
                .unwrap_or_else(|| Value::String(self.render())),
            Cell::Int(n) => Value::from(*n),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<i64> for Cell {
    fn from(n: i64) -> Self {
        Cell::Int(n)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.into())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

/// Row status values.
pub const OK: &str = "ok";
pub const FAIL: &str = "fail";
pub const ERROR: &str = "error";

pub fn status(pass: bool) -> &'static str {
    if pass {
        OK
    } else {
        FAIL
    }
}

/// Experiment columns; `status` and the provenance columns are appended on write.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    rows: Vec<(Vec<Cell>, String)>,
}

pub const PROVENANCE: [&str; 5] = ["q", "lmax_doubled", "precision_bits", "seed", "version"];

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    /// Add a row; missing trailing cells are left empty.
    pub fn push(&mut self, mut cells: Vec<Cell>, status: &str) {
        assert!(cells.len() <= self.columns.len(), "row wider than header");
        cells.resize(self.columns.len(), Cell::Empty);
        self.rows.push((cells, status.to_string()));
    }

    /// Add a row from `(column, value)` pairs; other cells are empty.
    pub fn push_named(&mut self, named: Vec<(&str, Cell)>, status: &str) {
        let mut cells = vec![Cell::Empty; self.columns.len()];
        for (name, cell) in named {
            let k = self
                .columns
                .iter()
                .position(|c| *c == name)
                .unwrap_or_else(|| panic!("unknown column {name}"));
            cells[k] = cell;
        }
        self.rows.push((cells, status.to_string()));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn header(&self) -> Vec<String> {
        self.columns
            .iter()
            .map(|c| c.to_string())
            .chain(std::iter::once("status".to_string()))
            .chain(PROVENANCE.iter().map(|c| c.to_string()))
            .collect()
    }

    fn full_rows(&self, cfg: &RunConfig) -> Vec<Vec<Cell>> {
        let prov = [
            Cell::Float(cfg.q),
            Cell::Int(cfg.lmax_doubled),
            Cell::Int(cfg.precision_bits as i64),
            Cell::Text(cfg.seed.to_string()),
            Cell::text(VERSION),
        ];
        self.rows
            .iter()
            .map(|(cells, st)| {
                cells
                    .iter()
                    .cloned()
                    .chain(std::iter::once(Cell::Text(st.clone())))
                    .chain(prov.iter().cloned())
                    .collect()
            })
            .collect()
    }

    pub fn to_csv(&self, cfg: &RunConfig) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.header())
            .map_err(|e| std::io::Error::other(e.to_string()))?;
        for row in self.full_rows(cfg) {
            w.write_record(row.iter().map(Cell::render))
                .map_err(|e| std::io::Error::other(e.to_string()))?;
        }
        w.into_inner().map_err(|e| std::io::Error::other(e.to_string()).into())
    }

    pub fn to_json(&self, cfg: &RunConfig) -> Result<Vec<u8>> {
        let header = self.header();
        let rows: Vec<Value> = self
            .full_rows(cfg)
            .into_iter()
            .map(|row| {
                let obj: Map<String, Value> = header
                    .iter()
                    .cloned()
                    .zip(row.iter().map(Cell::json))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        let doc = serde_json::json!({
            "experiment": cfg.experiment.name(),
            "columns": header,
            "rows": rows,
        });
        let mut out = serde_json::to_vec_pretty(&doc)?;
        out.push(b'\n');
        Ok(out)
    }

    pub fn write(&self, cfg: &RunConfig, path: &Path) -> Result<()> {
        let bytes = match cfg.format {
            Format::Csv => self.to_csv(cfg)?,
            Format::Json => self.to_json(cfg)?,
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(&bytes)?;
        Ok(())
    }
}

/// One summary line.
#[derive(Clone, Debug, PartialEq)]
pub struct Criterion {
    pub name: String,
    pub measured: f64,
    /// Human-readable acceptance condition, e.g. `< 1e-8`.
    pub condition: String,
    pub pass: bool,
}

impl Criterion {
    pub fn below(name: &str, measured: f64, threshold: f64) -> Self {
        Criterion {
            name: name.into(),
            measured,
            condition: format!("< {threshold:e}"),
            pass: measured < threshold,
        }
    }

    pub fn check(name: &str, measured: f64, condition: impl Into<String>, pass: bool) -> Self {
        Criterion {
            name: name.into(),
            measured,
            condition: condition.into(),
            pass,
        }
    }

    pub fn failed(name: &str, message: impl fmt::Display) -> Self {
        Criterion {
            name: name.into(),
            measured: f64::NAN,
            condition: format!("error: {message}"),
            pass: false,
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{tag} {} measured={:.6e} ({})", self.name, self.measured, self.condition)
    }
}

/// Output of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub table: Table,
    pub criteria: Vec<Criterion>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::{ConfigArgs, Experiment};

    #[test]
    fn csv_layout() {
        let cfg = RunConfig::resolve(Experiment::Heat, &ConfigArgs::default(), None).unwrap();
        let mut t = Table::new(&["name", "value"]);
        t.push(vec!["a,b".into(), 0.1.into()], OK);
        t.push_named(vec![("value", Cell::Float(f64::NAN))], ERROR);
        let text = String::from_utf8(t.to_csv(&cfg).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "name,value,status,q,lmax_doubled,precision_bits,seed,version");
        assert!(lines[1].starts_with("\"a,b\",1.0000000000000001e-1,ok,1.2000000000000000e0,62,53,"));
        assert!(lines[2].starts_with(",NaN,error,"));
        let json: Value = serde_json::from_slice(&t.to_json(&cfg).unwrap()).unwrap();
        assert_eq!(json["rows"][0]["name"], "a,b");
        assert_eq!(json["rows"][1]["name"], Value::Null);
    }
}
