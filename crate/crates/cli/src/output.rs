//! Record writers. CSV uses `,` and `\n`, writes a header before each run
//! of records sharing the same fields and prints floats with 17
//! significant digits; absent values are empty fields.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

pub const OUTPUT_DIR_VAR: &str = "DQPS_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    #[value(alias = "json-lines")]
    Jsonl,
}

/// Relative paths land in `$DQPS_OUTPUT_DIR` when it is set.
pub fn resolve_path(path: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_VAR) {
        Some(dir) if path.is_relative() && !dir.is_empty() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

pub struct RecordWriter {
    format: Format,
    text: String,
    header: Option<Vec<String>>,
}

impl RecordWriter {
    pub fn new(format: Format) -> Self {
        Self {
            format,
            text: String::new(),
            header: None,
        }
    }

    pub fn record<T: Serialize>(&mut self, record: &T) -> CliResult<()> {
        let value = serde_json::to_value(record).map_err(|e| CliError::Io(e.to_string()))?;
        match self.format {
            Format::Jsonl => {
                self.text.push_str(&value.to_string());
                self.text.push('\n');
            }
            Format::Csv => {
                let mut fields = Vec::new();
                flatten("", &value, &mut fields);
                let keys: Vec<String> = fields.iter().map(|(k, _)| k.clone()).collect();
                if self.header.as_ref() != Some(&keys) {
                    if self.header.is_some() {
                        self.text.push('\n');
                    }
                    self.text.push_str(&keys.join(","));
                    self.text.push('\n');
                    self.header = Some(keys);
                }
                let cells: Vec<&str> = fields.iter().map(|(_, v)| v.as_str()).collect();
                self.text.push_str(&cells.join(","));
                self.text.push('\n');
            }
        }
        Ok(())
    }

    /// Writes to `path`, or stdout when there is none.
    pub fn finish(self, path: Option<&Path>) -> CliResult<()> {
        match path {
            Some(path) => {
                let path = resolve_path(path);
                std::fs::write(&path, self.text).map_err(|e| CliError::io(&path, e))
            }
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(self.text.as_bytes())
                    .and_then(|()| out.flush())
                    .map_err(|e| CliError::Io(format!("stdout: {e}")))
            }
        }
    }
}

pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn scalar(v: &Value) -> Option<String> {
    Some(match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => u.to_string(),
            (None, Some(i)) => i.to_string(),
            _ => format_float(n.as_f64().unwrap_or(f64::NAN)),
        },
        Value::String(s) if s.contains([',', '"', '\n']) => {
            format!("\"{}\"", s.replace('"', "\"\""))
        }
        Value::String(s) => s.clone(),
        Value::Array(_) | Value::Object(_) => return None,
    })
}

fn join_key(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

/// Nested objects become dotted columns; arrays of scalars become one
/// `;`-separated cell.
fn flatten(prefix: &str, value: &Value, out: &mut Vec<(String, String)>) {
    match value {
        Value::Object(map) => flatten_object(prefix, map, out),
        Value::Array(items) => {
            let cells: Option<Vec<String>> = items.iter().map(scalar).collect();
            match cells {
                Some(cells) => out.push((prefix.to_string(), cells.join(";"))),
                None => {
                    for (i, item) in items.iter().enumerate() {
                        flatten(&join_key(prefix, &i.to_string()), item, out);
                    }
                }
            }
        }
        other => out.push((prefix.to_string(), scalar(other).unwrap_or_default())),
    }
}

fn flatten_object(prefix: &str, map: &Map<String, Value>, out: &mut Vec<(String, String)>) {
    for (k, v) in map {
        flatten(&join_key(prefix, k), v, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        #[serde(rename = "L")]
        l: usize,
        x: f64,
        y: Option<f64>,
        ok: bool,
        counts: [Vec<u64>; 2],
    }

    #[test]
    fn csv_layout() {
        let mut w = RecordWriter::new(Format::Csv);
        let row = Row {
            l: 2,
            x: 0.1,
            y: None,
            ok: true,
            counts: [vec![1, 2], vec![3]],
        };
        w.record(&row).unwrap();
        w.record(&row).unwrap();
        let line = "2,1.0000000000000001e-1,,true,1;2,3\n";
        assert_eq!(w.text, format!("L,x,y,ok,counts.0,counts.1\n{line}{line}"));
    }

    #[test]
    fn csv_floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2.5e-300, 123456.789, f64::MIN_POSITIVE] {
            assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn jsonl_one_line_per_record() {
        let mut w = RecordWriter::new(Format::Jsonl);
        w.record(&serde_json::json!({"a": 1, "b": null})).unwrap();
        w.record(&serde_json::json!({"a": 2.5})).unwrap();
        assert_eq!(w.text, "{\"a\":1,\"b\":null}\n{\"a\":2.5}\n");
    }

    #[test]
    fn new_header_when_fields_change() {
        let mut w = RecordWriter::new(Format::Csv);
        w.record(&serde_json::json!({"a": 1})).unwrap();
        w.record(&serde_json::json!({"b": 2})).unwrap();
        assert_eq!(w.text, "a\n1\n\nb\n2\n");
    }
}
