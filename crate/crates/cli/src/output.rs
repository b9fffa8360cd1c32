//! Tabular output shared by all subcommands.
//!
//! Exact values are written as `numerator/denominator` next to a decimal
//! rendering; floating-point values are marked approximate in JSON.

use std::io::{self, Write};

use clap::ValueEnum;
use freetensor_core::arith::{to_decimal_string, to_fraction_string};
use freetensor_core::{Rational, Surd};
use serde_json::{json, Map, Value};

pub const FORMAT_VERSION: &str = "1";
const DECIMAL_DIGITS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Int,
    Exact,
    Surd,
    Float,
    Bool,
    Text,
}

#[derive(Debug, Clone)]
pub enum Cell {
    Int(u64),
    Exact(Rational),
    Surd(Surd),
    Float(Option<f64>),
    Bool(bool),
    Text(String),
}

impl Cell {
    fn kind(&self) -> Kind {
        match self {
            Cell::Int(_) => Kind::Int,
            Cell::Exact(_) => Kind::Exact,
            Cell::Surd(_) => Kind::Surd,
            Cell::Float(_) => Kind::Float,
            Cell::Bool(_) => Kind::Bool,
            Cell::Text(_) => Kind::Text,
        }
    }

    fn csv_fields(&self) -> Vec<String> {
        match self {
            Cell::Int(v) => vec![v.to_string()],
            Cell::Exact(r) => vec![to_fraction_string(r), to_decimal_string(r, DECIMAL_DIGITS)],
            Cell::Surd(s) => vec![surd_exact(s), surd_decimal(s)],
            Cell::Float(v) => vec![v.filter(|x| x.is_finite()).map(|x| x.to_string()).unwrap_or_default()],
            Cell::Bool(b) => vec![b.to_string()],
            Cell::Text(t) => vec![t.clone()],
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => json!(v),
            Cell::Exact(r) => json!({
                "exact": to_fraction_string(r),
                "decimal": to_decimal_string(r, DECIMAL_DIGITS),
            }),
            Cell::Surd(s) => json!({ "exact": surd_exact(s), "decimal": surd_decimal(s) }),
            Cell::Float(v) => json!({ "approx": v.filter(|x| x.is_finite()) }),
            Cell::Bool(b) => json!(b),
            Cell::Text(t) => json!(t),
        }
    }
}

fn surd_exact(s: &Surd) -> String {
    match s.as_rational() {
        Some(r) => to_fraction_string(r),
        None => format!("{}*sqrt({})", to_fraction_string(s.coeff()), to_fraction_string(s.radicand())),
    }
}

fn surd_decimal(s: &Surd) -> String {
    match s.as_rational() {
        Some(r) => to_decimal_string(r, DECIMAL_DIGITS),
        None => format!("{:.*}", DECIMAL_DIGITS, s.to_f64()),
    }
}

/// A command's result: an echo of the invocation, its resolved parameters,
/// and a table of rows.
#[derive(Debug, Clone)]
pub struct Report {
    pub command: String,
    pub parameters: Vec<(String, Cell)>,
    pub columns: Vec<(&'static str, Kind)>,
    pub rows: Vec<Vec<Cell>>,
    pub extra: Option<(&'static str, Value)>,
}

impl Report {
    pub fn new(command: String, columns: Vec<(&'static str, Kind)>) -> Self {
        Self {
            command,
            parameters: Vec::new(),
            columns,
            rows: Vec::new(),
            extra: None,
        }
    }

    pub fn param(&mut self, name: &str, value: Cell) {
        self.parameters.push((name.to_string(), value));
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        debug_assert!(row.iter().zip(&self.columns).all(|(c, (_, k))| c.kind() == *k));
        self.rows.push(row);
    }

    pub fn write(&self, format: Format, out: &mut dyn Write) -> io::Result<()> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => self.write_json(out),
        }
    }

    fn write_csv(&self, out: &mut dyn Write) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = Vec::new();
        for (name, kind) in &self.columns {
            header.push(name.to_string());
            if matches!(kind, Kind::Exact | Kind::Surd) {
                header.push(format!("{name}_decimal"));
            }
        }
        w.write_record(&header)?;
        for row in &self.rows {
            w.write_record(row.iter().flat_map(Cell::csv_fields))?;
        }
        w.flush()
    }

    fn write_json(&self, out: &mut dyn Write) -> io::Result<()> {
        let mut params = Map::new();
        for (name, value) in &self.parameters {
            params.insert(name.clone(), value.json());
        }
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|((name, _), cell)| (name.to_string(), cell.json()))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        let mut doc = Map::new();
        doc.insert("format_version".into(), json!(FORMAT_VERSION));
        doc.insert("command".into(), json!(self.command));
        doc.insert("parameters".into(), Value::Object(params));
        doc.insert(
            "columns".into(),
            json!(self.columns.iter().map(|(n, _)| n).collect::<Vec<_>>()),
        );
        doc.insert("rows".into(), Value::Array(rows));
        if let Some((key, value)) = &self.extra {
            doc.insert(key.to_string(), value.clone());
        }
        serde_json::to_writer_pretty(&mut *out, &Value::Object(doc))?;
        writeln!(out)
    }
}
