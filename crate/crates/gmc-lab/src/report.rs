//! Machine-readable reports: CSV tables and JSON summaries.
//!
//! Columns keep a stable order and floats are serialized with 17 significant
//! digits so that identical runs produce byte-identical files. The JSON
//! writer is hand-rolled for the same reason (ordered keys, fixed float
//! format); non-finite floats map to null.

use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

/// 17 significant digits, enough to round-trip any f64.
pub fn format_g17(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    format!("{x:.16e}")
}

#[derive(Clone, Debug)]
pub enum Cell {
    Int(i64),
    UInt(u64),
    Float(f64),
    Str(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::UInt(v) => v.to_string(),
            Cell::Float(v) => {
                if v.is_finite() {
                    format_g17(*v)
                } else {
                    "nan".into()
                }
            }
            Cell::Str(s) => s.clone(),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct CsvTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl CsvTable {
    pub fn new(columns: &[&str]) -> Self {
        CsvTable {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::Degenerate("refusing to emit an empty report".into()));
        }
        std::fs::write(path, self.render())?;
        Ok(())
    }
}

/// JSON value with ordered object keys.
#[derive(Clone, Debug)]
pub enum Json {
    Null,
    Bool(bool),
    Int(i64),
    UInt(u64),
    Float(f64),
    Str(String),
    Array(Vec<Json>),
    Object(Vec<(String, Json)>),
}

impl Json {
    pub fn render(&self) -> String {
        let mut s = String::new();
        self.render_into(&mut s);
        s
    }

    fn render_into(&self, out: &mut String) {
        match self {
            Json::Null => out.push_str("null"),
            Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Json::Int(v) => {
                let _ = write!(out, "{v}");
            }
            Json::UInt(v) => {
                let _ = write!(out, "{v}");
            }
            Json::Float(v) => {
                if v.is_finite() {
                    out.push_str(&format_g17(*v));
                } else {
                    out.push_str("null");
                }
            }
            Json::Str(s) => {
                out.push('"');
                for c in s.chars() {
                    match c {
                        '"' => out.push_str("\\\""),
                        '\\' => out.push_str("\\\\"),
                        '\n' => out.push_str("\\n"),
                        '\t' => out.push_str("\\t"),
                        '\r' => out.push_str("\\r"),
                        c if (c as u32) < 0x20 => {
                            let _ = write!(out, "\\u{:04x}", c as u32);
                        }
                        c => out.push(c),
                    }
                }
                out.push('"');
            }
            Json::Array(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    item.render_into(out);
                }
                out.push(']');
            }
            Json::Object(fields) => {
                out.push('{');
                for (i, (k, v)) in fields.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    Json::Str(k.clone()).render_into(out);
                    out.push(':');
                    v.render_into(out);
                }
                out.push('}');
            }
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: &str, pass: bool, detail: String) -> Self {
        Verdict {
            name: name.into(),
            pass,
            detail,
        }
    }

    pub fn to_json(&self) -> Json {
        Json::Object(vec![
            ("name".into(), Json::Str(self.name.clone())),
            ("pass".into(), Json::Bool(self.pass)),
            ("detail".into(), Json::Str(self.detail.clone())),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for &x in &[
            1.0,
            -2.5e-7,
            std::f64::consts::PI,
            1.2337005501361697,
            f64::MIN_POSITIVE,
        ] {
            let s = format_g17(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(format_g17(0.0), "0");
    }

    #[test]
    fn empty_table_is_rejected() {
        let t = CsvTable::new(&["a", "b"]);
        let dir = std::env::temp_dir().join("gmc_report_test.csv");
        assert!(t.write(&dir).is_err());
    }

    #[test]
    fn csv_render_is_stable() {
        let mut t = CsvTable::new(&["t", "value"]);
        t.push(vec![Cell::Float(2.0), Cell::Float(-1.5)]);
        t.push(vec![Cell::Float(4.0), Cell::Float(f64::NAN)]);
        let a = t.render();
        let b = t.render();
        assert_eq!(a, b);
        assert!(a.starts_with("t,value\n"));
        assert!(a.contains("nan"));
    }

    #[test]
    fn json_round_trips_through_serde() {
        let doc = Json::Object(vec![
            ("schema_version".into(), Json::UInt(1)),
            ("name".into(), Json::Str("tube-decay \"x\"".into())),
            (
                "values".into(),
                Json::Array(vec![Json::Float(1.25), Json::Null, Json::Bool(true)]),
            ),
            ("rate".into(), Json::Float(-1.2337005501361697)),
        ]);
        let rendered = doc.render();
        let parsed: serde_json::Value = serde_json::from_str(&rendered).unwrap();
        assert_eq!(parsed["schema_version"], 1);
        assert_eq!(parsed["name"], "tube-decay \"x\"");
        assert_eq!(parsed["rate"].as_f64().unwrap(), -1.2337005501361697);
        assert!(parsed["values"][1].is_null());
    }
}
