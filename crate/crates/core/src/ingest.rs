//! Trace-driven runs: real measurements as symbol payloads.
//!
//! Input is a CSV of `timestamp,value` rows (an optional first line
//! `timestamp,value` is treated as a header). Each value is parsed as an
//! `f32` and carried as its 4-byte big-endian encoding.

use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::sim::{run_with, RunOptions, SimConfig, SimResult};
use crate::symbol::{Payload, Seq};

#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    pub line: u64,
    pub timestamp: String,
    pub value: f32,
}

impl Measurement {
    pub fn payload(&self) -> Payload {
        Payload::new(self.value.to_be_bytes().to_vec())
    }
}

pub fn read_measurements(path: &Path) -> Result<Vec<Measurement>> {
    let parse_err = |line: u64, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => parse_err(0, format!("{other:?}")),
        })?;
    let mut out = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(k as u64 + 1, |p| p.line());
        if rec.len() != 2 {
            return Err(parse_err(line, format!("expected 2 fields, found {}", rec.len())));
        }
        if line == 1
            && rec[0].eq_ignore_ascii_case("timestamp")
            && rec[1].eq_ignore_ascii_case("value")
        {
            continue;
        }
        let value: f32 = rec[1]
            .parse()
            .map_err(|_| parse_err(line, format!("value `{}` is not a number", &rec[1])))?;
        out.push(Measurement {
            line,
            timestamp: rec[0].to_string(),
            value,
        });
    }
    Ok(out)
}

/// Outcome of checking recovered payloads against the ingested values.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RecoveryReport {
    /// Delivered symbols whose payload matches the input byte for byte.
    pub intact: Vec<Seq>,
    /// Delivered symbols whose payload differs from the input.
    pub corrupted: Vec<Seq>,
    /// Symbols that expired undelivered.
    pub expired: Vec<Seq>,
}

impl RecoveryReport {
    pub fn all_intact(&self) -> bool {
        self.corrupted.is_empty()
    }
}

/// Runs `config` with the measurements as payloads. The run length is the
/// smaller of `config.n_symbols` and the number of rows.
pub fn ingest_run(config: &SimConfig, rows: &[Measurement]) -> Result<(SimResult, RecoveryReport)> {
    if rows.is_empty() {
        return Err(Error::invalid("measurement file has no rows"));
    }
    let mut cfg = config.clone();
    cfg.symbol_bits = 32;
    if (rows.len() as u64) < cfg.n_symbols {
        warn!(
            "measurement stream has {} rows; truncating run from {} symbols",
            rows.len(),
            cfg.n_symbols
        );
    }
    let payloads: Vec<Payload> = rows.iter().map(Measurement::payload).collect();
    let opts = RunOptions {
        record_trace: cfg.trace_output.is_some(),
        keep_payloads: true,
    };
    let result = run_with(&cfg, Some(&payloads), opts)?;
    let mut report = RecoveryReport::default();
    let recovered = result.recovered.as_deref().unwrap_or(&[]);
    for (seq, got) in recovered.iter().enumerate() {
        match got {
            Some(p) if *p == payloads[seq] => report.intact.push(seq as Seq),
            Some(_) => report.corrupted.push(seq as Seq),
            None => report.expired.push(seq as Seq),
        }
    }
    Ok((result, report))
}
