//! CSV and JSON result tables.

use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::harness::sweep::ResultRow;

pub const HEADER: [&str; 9] = ["axis", "algorithm", "rate_bpshz", "iterations", "wall_time_s", "sv1", "sv2", "p1", "p2"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// Guess from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::InvalidSweep(format!("unknown output format `{s}`"))),
        }
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_num(x: Option<&f64>) -> String {
    x.map(|&v| num(v)).unwrap_or_default()
}

fn fields(r: &ResultRow) -> [String; 9] {
    [
        num(r.axis_value),
        r.algorithm.clone(),
        opt_num(r.rate.as_ref()),
        r.iterations.to_string(),
        num(r.wall_time_s),
        opt_num(r.singular_values.first()),
        opt_num(r.singular_values.get(1)),
        opt_num(r.power.first()),
        opt_num(r.power.get(1)),
    ]
}

pub fn to_csv(rows: &[ResultRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let wrap = |e: csv::Error| Error::Numerical(format!("csv encoding: {e}"));
    w.write_record(HEADER).map_err(wrap)?;
    for r in rows {
        w.write_record(fields(r)).map_err(wrap)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Numerical(format!("csv encoding: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn json_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn json_num(x: Option<&f64>) -> String {
    match x {
        Some(v) if v.is_finite() => num(*v),
        _ => "null".into(),
    }
}

pub fn to_json(rows: &[ResultRow]) -> String {
    let mut out = String::from("[");
    for (i, r) in rows.iter().enumerate() {
        out.push_str(if i == 0 { "\n  {" } else { ",\n  {" });
        let values = [
            json_num(Some(&r.axis_value)),
            json_string(&r.algorithm),
            json_num(r.rate.as_ref()),
            r.iterations.to_string(),
            json_num(Some(&r.wall_time_s)),
            json_num(r.singular_values.first()),
            json_num(r.singular_values.get(1)),
            json_num(r.power.first()),
            json_num(r.power.get(1)),
        ];
        let body: Vec<String> = HEADER.iter().zip(values).map(|(k, v)| format!("\"{k}\": {v}")).collect();
        out.push_str(&body.join(", "));
        out.push('}');
    }
    out.push_str(if rows.is_empty() { "]\n" } else { "\n]\n" });
    out
}

pub fn render(rows: &[ResultRow], format: Format) -> Result<String> {
    match format {
        Format::Csv => to_csv(rows),
        Format::Json => Ok(to_json(rows)),
    }
}

/// Write `rows` to `path`.
pub fn emit(rows: &[ResultRow], format: Format, path: &Path) -> Result<()> {
    let text = render(rows, format)?;
    std::fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}
