use std::io::Write;

use serde_json::{Map, Value};

use crate::config::OutputFormat;
use crate::error::CliResult;

/// Version stamped on every output row.
pub const LIBRARY_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Rows of one experiment. Every row ends with `config_hash` and `version`.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    config_hash: String,
}

impl Table {
    pub fn new(columns: &[&str], config_hash: &str) -> Self {
        Table {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            config_hash: config_hash.to_string(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Value>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[k]).collect())
    }

    /// Numeric column as `f64`; non-numbers become NaN.
    pub fn floats(&self, name: &str) -> Option<Vec<f64>> {
        Some(
            self.column(name)?
                .into_iter()
                .map(|v| v.as_f64().unwrap_or(f64::NAN))
                .collect(),
        )
    }

    fn full_columns(&self) -> Vec<String> {
        let mut c = self.columns.clone();
        c.push("config_hash".into());
        c.push("version".into());
        c
    }

    fn full_row(&self, r: &[Value]) -> Vec<Value> {
        let mut v = r.to_vec();
        v.push(Value::String(self.config_hash.clone()));
        v.push(Value::String(LIBRARY_VERSION.into()));
        v
    }

    pub fn write_csv<W: Write>(&self, w: W) -> CliResult<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(self.full_columns())?;
        for r in &self.rows {
            let cells: Vec<String> = self
                .full_row(r)
                .iter()
                .map(|v| match v {
                    Value::String(s) => s.clone(),
                    Value::Null => String::new(),
                    other => other.to_string(),
                })
                .collect();
            out.write_record(cells)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Array of objects whose keys follow the CSV column order.
    pub fn to_json(&self) -> Value {
        let cols = self.full_columns();
        Value::Array(
            self.rows
                .iter()
                .map(|r| {
                    let mut m = Map::new();
                    for (c, v) in cols.iter().zip(self.full_row(r)) {
                        m.insert(c.clone(), v);
                    }
                    Value::Object(m)
                })
                .collect(),
        )
    }

    pub fn write<W: Write>(&self, mut w: W, format: OutputFormat) -> CliResult<()> {
        match format {
            OutputFormat::Csv => self.write_csv(w),
            OutputFormat::Json => {
                serde_json::to_writer_pretty(&mut w, &self.to_json())?;
                writeln!(w)?;
                Ok(())
            }
        }
    }
}

/// JSON number for finite values, `null` otherwise.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}
