//! CSV and JSON file formats.
//!
//! | file            | header                          |
//! |-----------------|---------------------------------|
//! | trace CSV       | `time_s,volts`                  |
//! | charge CSV      | `pulse_index,charge_e`          |
//! | histogram CSV   | `bin_left_e,bin_right_e,count`  |
//!
//! Headers are mandatory, the decimal separator is `.`, and files are UTF-8.
//! Floats are written in shortest round-trip form, so a written file reads
//! back bit-identically.

use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::readout::{ChargeSamples, VoltageTrace};
use crate::statistics::ElectronHistogram;

pub const TRACE_HEADER: [&str; 2] = ["time_s", "volts"];
pub const CHARGE_HEADER: [&str; 2] = ["pulse_index", "charge_e"];
pub const HISTOGRAM_HEADER: [&str; 3] = ["bin_left_e", "bin_right_e", "count"];

pub fn write_trace_csv<W: Write>(w: W, trace: &VoltageTrace) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRACE_HEADER)?;
    for (t, v) in trace.sample_times.iter().zip(&trace.voltages) {
        out.write_record([t.to_string(), v.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_charges_csv<W: Write>(w: W, charges: &ChargeSamples) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CHARGE_HEADER)?;
    for (i, q) in charges.pulse_indices.iter().zip(&charges.charges) {
        out.write_record([i.to_string(), q.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_histogram_csv<W: Write>(w: W, hist: &ElectronHistogram) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(HISTOGRAM_HEADER)?;
    for (l, r, c) in hist.bins() {
        out.write_record([l.to_string(), r.to_string(), c.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Pretty-printed JSON with a trailing newline. Field order follows the
/// struct declaration.
pub fn write_json<W: Write, T: Serialize>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

fn reader<R: Read>(r: R, header: &[&str]) -> Result<csv::Reader<R>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(r);
    let found = rdr.headers().map_err(|e| parse_error(&e, 1))?;
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                header.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    Ok(rdr)
}

fn parse_error(e: &csv::Error, fallback_line: u64) -> Error {
    Error::Parse {
        line: e.position().map_or(fallback_line, |p| p.line()),
        message: e.to_string(),
    }
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<T> {
    let raw = rec.get(idx).ok_or_else(|| Error::Parse {
        line,
        message: format!("missing column `{name}`"),
    })?;
    raw.parse().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse `{raw}` as {name}"),
    })
}

pub fn read_charges_csv<R: Read>(r: R) -> Result<ChargeSamples> {
    let mut rdr = reader(r, &CHARGE_HEADER)?;
    let mut out = ChargeSamples::default();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| parse_error(&e, k as u64 + 2))?;
        let line = rec.position().map_or(k as u64 + 2, |p| p.line());
        out.pulse_indices.push(field(&rec, 0, "pulse_index", line)?);
        let q: f64 = field(&rec, 1, "charge_e", line)?;
        if !q.is_finite() {
            return Err(Error::Parse {
                line,
                message: format!("charge `{q}` is not finite"),
            });
        }
        out.charges.push(q);
    }
    Ok(out)
}

/// Reads a trace written by [`write_trace_csv`]. The conversion constant and
/// window length are not stored in the file and must be supplied.
pub fn read_trace_csv<R: Read>(r: R, electrons_per_volt: f64, window: f64) -> Result<VoltageTrace> {
    let mut rdr = reader(r, &TRACE_HEADER)?;
    let mut sample_times = Vec::new();
    let mut voltages = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| parse_error(&e, k as u64 + 2))?;
        let line = rec.position().map_or(k as u64 + 2, |p| p.line());
        sample_times.push(field(&rec, 0, "time_s", line)?);
        voltages.push(field(&rec, 1, "volts", line)?);
    }
    let sample_interval = match sample_times.as_slice() {
        [a, b, ..] => b - a,
        _ => window,
    };
    let trace = VoltageTrace {
        sample_times,
        voltages,
        electrons_per_volt,
        window,
        sample_interval,
    };
    trace.validate()?;
    Ok(trace)
}
