//! Trace CSV format.
//!
//! Stable schema, one record per sample:
//!
//! ```text
//! t_s,drift_phase_rad,bias_v,p_out_dbm,monitor_v,d11,d2,r,action
//! ```
//!
//! Floating-point fields carry 9 significant digits; controller columns are
//! empty while the controller has not produced the quantity (always, in
//! open loop). Files are written atomically (temp file + rename) so
//! concurrent invocations never interleave bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use mzm_core::{ActionTag, SimTrace, TraceRecord};

use crate::CliError;

pub const CSV_HEADER: &str = "t_s,drift_phase_rad,bias_v,p_out_dbm,monitor_v,d11,d2,r,action";

fn fmt_field(x: f64) -> String {
    // 9 significant digits
    format!("{x:.8e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_field).unwrap_or_default()
}

/// Serialize a trace to the CSV schema.
pub fn trace_to_csv(trace: &SimTrace) -> String {
    let mut out = String::with_capacity(64 * (trace.records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &trace.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            fmt_field(r.t),
            fmt_field(r.drift_phase),
            fmt_field(r.bias_voltage),
            fmt_field(r.output_power_dbm),
            fmt_field(r.monitor_voltage),
            fmt_opt(r.d11),
            fmt_opt(r.d2),
            fmt_opt(r.r),
            r.last_action.map(|a| a.as_str()).unwrap_or(""),
        );
    }
    out
}

/// Write bytes atomically: a temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
    fs::write(&tmp, contents)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path)
        .map_err(|e| CliError::Io(format!("cannot rename to {}: {e}", path.display())))?;
    Ok(())
}

pub fn write_trace_csv(path: &Path, trace: &SimTrace) -> Result<(), CliError> {
    write_atomic(path, &trace_to_csv(trace))
}

fn parse_f64(field: &str, line_no: usize, path: &Path) -> Result<f64, CliError> {
    field.parse().map_err(|_| {
        CliError::Validation(format!(
            "{} line {line_no}: `{field}` is not a number",
            path.display()
        ))
    })
}

fn parse_opt(field: &str, line_no: usize, path: &Path) -> Result<Option<f64>, CliError> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse_f64(field, line_no, path).map(Some)
    }
}

/// Read a trace CSV back. Phase-error information is not present in the
/// file format, so phase-derived metrics are unavailable on loaded traces.
pub fn read_trace_csv(path: &Path) -> Result<SimTrace, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CSV_HEADER => {}
        _ => {
            return Err(CliError::Validation(format!(
                "{}: missing or unexpected CSV header",
                path.display()
            )))
        }
    }
    let mut trace = SimTrace::default();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(CliError::Validation(format!(
                "{} line {line_no}: expected 9 fields, found {}",
                path.display(),
                fields.len()
            )));
        }
        trace.records.push(TraceRecord {
            t: parse_f64(fields[0], line_no, path)?,
            drift_phase: parse_f64(fields[1], line_no, path)?,
            bias_voltage: parse_f64(fields[2], line_no, path)?,
            output_power_dbm: parse_f64(fields[3], line_no, path)?,
            monitor_voltage: parse_f64(fields[4], line_no, path)?,
            phase_error: f64::NAN,
            d11: parse_opt(fields[5], line_no, path)?,
            d2: parse_opt(fields[6], line_no, path)?,
            r: parse_opt(fields[7], line_no, path)?,
            last_action: ActionTag::parse(fields[8]),
        });
    }
    Ok(trace)
}
