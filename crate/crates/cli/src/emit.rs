//! Byte-stable artifacts: sorted-key JSON and CSV with every float rounded
//! to 12 significant digits.
//!
//! Files written into the output directory:
//!
//! | file             | columns                                          |
//! |------------------|--------------------------------------------------|
//! | `report.json`    | the full report                                  |
//! | `aggregates.csv` | `n,metric,count,mean,sd,ci_lo,ci_hi`             |
//! | `replicas.csv`   | `n,replica,seed,metric,value`                    |
//! | `verdicts.csv`   | `rule,passed,observed,threshold,detail`          |
//! | `geodesics.csv`  | `n,seed,xi,passage_time,length,zero_count,positive_count,n_min,n_max,n_max_exact,touches_boundary` |
//! | `<table>.csv`    | the table's own columns                          |
//!
//! `geodesics.csv` is written only for lattice runs. Its `xi` column holds
//! the direction's components separated by spaces, and the three length
//! extreme columns are empty unless `length_extremes` was set.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde_json::{Map, Number, Value};
use thiserror::Error;

use crate::report::ExperimentReport;

pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .unwrap_or(x)
}

/// Fixed text for a float: plain decimal in a readable range, exponent form
/// outside it.
pub fn format_number(x: f64) -> String {
    let r = round_sig(x);
    if r.is_nan() {
        return "NaN".into();
    }
    if r.is_infinite() {
        return if r > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let a = r.abs();
    if r == 0.0 {
        "0".into()
    } else if (1e-6..1e15).contains(&a) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

fn canonical(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            let mut out = Map::new();
            for (k, v) in entries {
                out.insert(k, canonical(v));
            }
            Value::Object(out)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonical).collect()),
        Value::Number(n) if n.is_f64() => n
            .as_f64()
            .and_then(|x| Number::from_f64(round_sig(x)))
            .map_or(Value::Null, Value::Number),
        other => other,
    }
}

pub fn to_json(report: &ExperimentReport) -> Result<String, EmitError> {
    let value = canonical(serde_json::to_value(report)?);
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    Ok(text)
}

fn csv_bytes(
    header: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<Vec<u8>, EmitError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| EmitError::Io {
        path: PathBuf::from("<csv buffer>"),
        source: e.into_error(),
    })
}

/// Every CSV artifact as `(file name, bytes)`, sorted by name.
pub fn to_csv(report: &ExperimentReport) -> Result<Vec<(String, Vec<u8>)>, EmitError> {
    let f = format_number;
    let mut files = vec![
        (
            "aggregates.csv".to_string(),
            csv_bytes(
                &["n", "metric", "count", "mean", "sd", "ci_lo", "ci_hi"],
                report.aggregates.iter().map(|a| {
                    vec![
                        f(a.n),
                        a.metric.clone(),
                        a.count.to_string(),
                        f(a.mean),
                        f(a.sd),
                        f(a.ci_lo),
                        f(a.ci_hi),
                    ]
                }),
            )?,
        ),
        (
            "replicas.csv".to_string(),
            csv_bytes(
                &["n", "replica", "seed", "metric", "value"],
                report.replicas.iter().map(|r| {
                    vec![
                        f(r.n),
                        r.replica.to_string(),
                        r.seed.to_string(),
                        r.metric.clone(),
                        f(r.value),
                    ]
                }),
            )?,
        ),
        (
            "verdicts.csv".to_string(),
            csv_bytes(
                &["rule", "passed", "observed", "threshold", "detail"],
                report.verdicts.iter().map(|v| {
                    vec![
                        v.rule.clone(),
                        v.passed.to_string(),
                        f(v.observed),
                        f(v.threshold),
                        v.detail.clone(),
                    ]
                }),
            )?,
        ),
    ];
    if !report.geodesics.is_empty() {
        let opt = |v: Option<String>| v.unwrap_or_default();
        files.push((
            "geodesics.csv".to_string(),
            csv_bytes(
                &[
                    "n",
                    "seed",
                    "xi",
                    "passage_time",
                    "length",
                    "zero_count",
                    "positive_count",
                    "n_min",
                    "n_max",
                    "n_max_exact",
                    "touches_boundary",
                ],
                report.geodesics.iter().map(|g| {
                    vec![
                        opt(g.n.map(f)),
                        g.seed.to_string(),
                        opt(g
                            .xi
                            .as_ref()
                            .map(|xi| xi.iter().map(|&x| f(x)).collect::<Vec<_>>().join(" "))),
                        f(g.passage_time),
                        g.length.to_string(),
                        g.zero_count.to_string(),
                        g.positive_count.to_string(),
                        opt(g.n_min.map(|v| v.to_string())),
                        opt(g.n_max.map(|v| v.to_string())),
                        opt(g.n_max_exact.map(|v| v.to_string())),
                        g.touches_boundary.to_string(),
                    ]
                }),
            )?,
        ));
    }
    for (name, table) in &report.tables {
        let header: Vec<&str> = table.columns.iter().map(String::as_str).collect();
        files.push((
            format!("{name}.csv"),
            csv_bytes(
                &header,
                table.rows.iter().map(|r| r.iter().map(|&x| f(x)).collect()),
            )?,
        ));
    }
    files.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(files)
}

fn write(path: PathBuf, bytes: &[u8]) -> Result<PathBuf, EmitError> {
    fs::write(&path, bytes).map_err(|source| EmitError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Writes the report in `formats` under `dir`, returning the written paths.
pub fn emit(
    report: &ExperimentReport,
    dir: &Path,
    formats: &[Format],
) -> Result<Vec<PathBuf>, EmitError> {
    fs::create_dir_all(dir).map_err(|source| EmitError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    if formats.contains(&Format::Json) {
        written.push(write(dir.join("report.json"), to_json(report)?.as_bytes())?);
    }
    if formats.contains(&Format::Csv) {
        for (name, bytes) in to_csv(report)? {
            written.push(write(dir.join(name), &bytes)?);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round_sig(0.18482752090556834), 0.184827520906);
        assert_eq!(round_sig(123456789012345.0), 123456789012000.0);
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(2.5e-9), "2.5e-9");
        assert_eq!(format_number(0.0), "0");
    }

    #[test]
    fn keys_come_out_sorted() {
        let v = canonical(serde_json::json!({"b": 1, "a": {"d": 0.1234567890123456, "c": 2}}));
        assert_eq!(
            serde_json::to_string(&v).unwrap(),
            r#"{"a":{"c":2,"d":0.123456789012},"b":1}"#
        );
    }
}
