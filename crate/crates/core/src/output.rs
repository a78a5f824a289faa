//! Plain-text artifacts. Every CSV starts with a `#` comment line carrying the
//! config hash and the seed; JSON artifacts carry the same two values as
//! fields. Reals are written with 17 significant digits.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::diagnostics::RunRecord;
use crate::error::{Error, Result};
use crate::meanfield::{Grid, Trajectory};

pub fn real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn header_line(config_hash: &str, seed: u64) -> String {
    format!("# config_hash={config_hash} seed={seed}\n")
}

/// Parses `# config_hash=<h> seed=<s>`.
pub fn parse_header(line: &str) -> Option<(String, u64)> {
    let rest = line.strip_prefix('#')?.trim();
    let mut hash = None;
    let mut seed = None;
    for part in rest.split_whitespace() {
        if let Some(h) = part.strip_prefix("config_hash=") {
            hash = Some(h.to_string());
        } else if let Some(s) = part.strip_prefix("seed=") {
            seed = s.parse().ok();
        }
    }
    Some((hash?, seed?))
}

pub const RECORD_COLUMNS: &str = "step,ensemble_mean,cloned_value,accepted,teleported";

pub fn record_csv(record: &RunRecord) -> String {
    let mut out = header_line(&record.config_hash, record.seed);
    out.push_str(RECORD_COLUMNS);
    out.push('\n');
    for k in 0..record.steps() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            k,
            real(record.ensemble_mean[k]),
            real(record.cloned_value[k]),
            record.accepted[k] as u8,
            record.teleported[k] as u8
        );
    }
    out
}

fn parse_flag(s: &str, line: usize) -> Result<bool> {
    match s {
        "0" | "false" => Ok(false),
        "1" | "true" => Ok(true),
        _ => Err(Error::invalid(format!("line {line}: expected 0 or 1, got `{s}`"))),
    }
}

fn parse_real(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::invalid(format!("line {line}: `{s}` is not a number")))
}

/// Reads a run-record CSV. The walker count is not stored in the file.
pub fn parse_record_csv(text: &str, n_walkers: usize) -> Result<RunRecord> {
    let mut record = RunRecord::new(n_walkers, 0, "");
    let mut seen_columns = false;
    for (no, line) in text.lines().enumerate() {
        let line_no = no + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if let Some((hash, seed)) = parse_header(line) {
                record.config_hash = hash;
                record.seed = seed;
            }
            continue;
        }
        if !seen_columns {
            if line != RECORD_COLUMNS {
                return Err(Error::invalid(format!("expected column line `{RECORD_COLUMNS}`")));
            }
            seen_columns = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(Error::invalid(format!("line {line_no}: expected 5 fields")));
        }
        record.push_raw(
            parse_real(f[1], line_no)?,
            parse_real(f[2], line_no)?,
            parse_flag(f[3], line_no)?,
            parse_flag(f[4], line_no)?,
        );
    }
    if !seen_columns {
        return Err(Error::invalid("run record has no column line"));
    }
    Ok(record)
}

pub fn trajectory_csv(traj: &Trajectory, config_hash: &str, seed: u64) -> String {
    let mut out = header_line(config_hash, seed);
    out.push_str("t,E,chi2,min_rho\n");
    for r in &traj.rows {
        let e = r.e.map(real).unwrap_or_else(|| "nan".into());
        let _ = writeln!(out, "{},{},{},{}", real(r.t), e, real(r.chi2), real(r.min_rho));
    }
    out
}

pub fn snapshots_csv(traj: &Trajectory, grid: &Grid, config_hash: &str, seed: u64) -> String {
    let mut out = header_line(config_hash, seed);
    out.push_str("t,x,rho\n");
    let nodes = grid.nodes();
    for s in &traj.snapshots {
        for (x, rho) in nodes.iter().zip(&s.values) {
            let _ = writeln!(out, "{},{},{}", real(s.t), real(*x), real(*rho));
        }
    }
    out
}

pub fn with_header(body: &str, config_hash: &str, seed: u64) -> String {
    let mut out = header_line(config_hash, seed);
    out.push_str(body);
    out
}

/// Pretty JSON of `value` with `config_hash` and `seed` prepended.
pub fn json_with_provenance<T: Serialize>(value: &T, config_hash: &str, seed: u64) -> Result<String> {
    let mut map = Map::new();
    map.insert("config_hash".into(), Value::String(config_hash.into()));
    map.insert("seed".into(), Value::from(seed));
    match serde_json::to_value(value)? {
        Value::Object(inner) => map.extend(inner),
        other => {
            map.insert("result".into(), other);
        }
    }
    let mut s = serde_json::to_string_pretty(&Value::Object(map))?;
    s.push('\n');
    Ok(s)
}
