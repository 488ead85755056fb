//! CSV and JSON-lines result writers.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::OutputFormat;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub scheme: String,
    /// Name of the independent variable, e.g. `snr_db` or `percentile`.
    pub axis: String,
    pub x: f64,
    /// Name of the measured quantity, e.g. `min_bpcu`.
    pub metric: String,
    pub value: f64,
    pub std_error: f64,
    pub trials: u64,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct JsonLine {
    schema_version: u32,
    config_hash: String,
    #[serde(flatten)]
    record: ResultRecord,
}

/// CSV header names for an experiment's axis and metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Columns {
    pub axis: &'static str,
    pub metric: &'static str,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format { context: "csv".into(), message: e.to_string() }
}

/// `scheme,<axis>,<metric>,std_error,trials,seed,config_hash`.
pub fn write_csv<W: Write>(records: &[ResultRecord], columns: Columns, config_hash: &str, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scheme", columns.axis, columns.metric, "std_error", "trials", "seed", "config_hash"])
        .map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.scheme.clone(),
            r.x.to_string(),
            r.value.to_string(),
            r.std_error.to_string(),
            r.trials.to_string(),
            r.seed.to_string(),
            config_hash.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Format { context: "csv".into(), message: e.to_string() })
}

pub fn write_jsonl<W: Write>(records: &[ResultRecord], config_hash: &str, mut out: W) -> Result<()> {
    for r in records {
        let line = JsonLine { schema_version: SCHEMA_VERSION, config_hash: config_hash.into(), record: r.clone() };
        let text = serde_json::to_string(&line)
            .map_err(|e| Error::Format { context: "jsonl".into(), message: e.to_string() })?;
        writeln!(out, "{text}").map_err(|e| Error::Format { context: "jsonl".into(), message: e.to_string() })?;
    }
    Ok(())
}

/// Parses a JSON-lines file back into records and their config hash.
pub fn read_jsonl(path: &Path) -> Result<(Vec<ResultRecord>, Option<String>)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hash = None;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: JsonLine = serde_json::from_str(&line).map_err(|e| Error::Format {
            context: format!("{}:{}", path.display(), n + 1),
            message: e.to_string(),
        })?;
        if parsed.schema_version != SCHEMA_VERSION {
            return Err(Error::Format {
                context: path.display().to_string(),
                message: format!("schema version {} (expected {SCHEMA_VERSION})", parsed.schema_version),
            });
        }
        hash = Some(parsed.config_hash);
        out.push(parsed.record);
    }
    Ok((out, hash))
}

/// Writes `records` to `path`, creating parent directories.
pub fn emit(
    records: &[ResultRecord],
    columns: Columns,
    config_hash: &str,
    format: OutputFormat,
    path: &Path,
) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut buf = Vec::new();
    match format {
        OutputFormat::Csv => write_csv(records, columns, config_hash, &mut buf)?,
        OutputFormat::Jsonl => write_jsonl(records, config_hash, &mut buf)?,
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}
