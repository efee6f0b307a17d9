//! Convergence histories as CSV.
//!
//! Header `iter,theta,theta_err,nu,phi,delta_lambda,delta_phi,event`. Floats
//! are written in shortest round-trip scientific notation, absent values as
//! empty fields, and several events of one step joined by `;`.

use std::fs;
use std::path::Path;

use cgeig_core::solvers::{ConvergenceHistory, Event, IterationRecord};

use crate::error::{HarnessError, Result};

pub const HEADER: [&str; 8] = ["iter", "theta", "theta_err", "nu", "phi", "delta_lambda", "delta_phi", "event"];

fn fmt_f(v: f64) -> String {
    format!("{v:e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f).unwrap_or_default()
}

/// CSV text of a history.
pub fn emit_csv(history: &ConvergenceHistory) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| -> ! { unreachable!("writing to memory cannot fail: {e}") };
    w.write_record(HEADER).unwrap_or_else(|e| csv_err(e));
    for r in &history.records {
        let events: Vec<&str> = r.events.iter().map(|e| e.token()).collect();
        w.write_record([
            r.iter.to_string(),
            fmt_f(r.theta),
            fmt_opt(r.theta_err),
            fmt_f(r.nu),
            fmt_opt(r.phi),
            fmt_opt(r.delta_lambda),
            fmt_opt(r.delta_phi),
            events.join(";"),
        ])
        .unwrap_or_else(|e| csv_err(e));
    }
    let bytes = w.into_inner().unwrap_or_else(|e| unreachable!("{e}"));
    String::from_utf8(bytes).expect("CSV output is ASCII")
}

pub fn write_csv(path: &Path, history: &ConvergenceHistory) -> Result<()> {
    fs::write(path, emit_csv(history)).map_err(|e| HarnessError::io(path, e))
}

/// Inverse of [`emit_csv`].
pub fn parse_csv(text: &str) -> Result<ConvergenceHistory> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| HarnessError::Csv(e.to_string()))?;
    if header.iter().ne(HEADER) {
        return Err(HarnessError::Csv(format!("unexpected header {header:?}")));
    }
    let mut records = Vec::new();
    for (k, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| HarnessError::Csv(e.to_string()))?;
        let bad = |what: &str, v: &str| HarnessError::Csv(format!("row {}: bad {what} '{v}'", k + 1));
        let f = |i: usize| -> Result<f64> { row[i].parse::<f64>().map_err(|_| bad(HEADER[i], &row[i])) };
        let opt = |i: usize| -> Result<Option<f64>> {
            if row[i].is_empty() {
                Ok(None)
            } else {
                f(i).map(Some)
            }
        };
        let events = if row[7].is_empty() {
            Vec::new()
        } else {
            row[7].split(';').map(|t| t.parse::<Event>().map_err(|_| bad("event", t))).collect::<Result<_>>()?
        };
        records.push(IterationRecord {
            iter: row[0].parse().map_err(|_| bad("iter", &row[0]))?,
            theta: f(1)?,
            theta_err: opt(2)?,
            nu: f(3)?,
            phi: opt(4)?,
            delta_lambda: opt(5)?,
            delta_phi: opt(6)?,
            events,
        });
    }
    Ok(ConvergenceHistory { records })
}

pub fn read_csv(path: &Path) -> Result<ConvergenceHistory> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_csv(&text)
}
