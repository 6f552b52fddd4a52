//! CSV and JSON writers. Numbers are printed with Rust's shortest
//! round-trip formatting, so parsing a written value gives back the same
//! `f64` bit pattern.

use std::io::Write;

use hgvm_core::{ComparisonTable, Trace};
use serde::Serialize;

use crate::CliError;

pub const TRACE_COLUMNS: [&str; 20] = [
    "t", "mode", "iL1", "iL2", "iL3", "vC1", "vC2", "vC3", "vC4", "vC5", "vC6", "vo", "io", "iD1",
    "iD2", "iD3", "iD4", "iD5", "iD6", "iQ",
];

/// Shortest representation that parses back to the same value.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// Unwraps the io error inside a csv error so its kind (e.g. a closed pipe)
/// survives.
fn io_error(e: csv::Error) -> std::io::Error {
    if !e.is_io_error() {
        return std::io::Error::other(e);
    }
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io,
        _ => unreachable!("is_io_error checked"),
    }
}

fn flush<W: Write>(w: csv::Writer<W>) -> std::io::Result<()> {
    w.into_inner().map_err(|e| e.into_error())?.flush()
}

pub fn write_trace_csv<W: Write>(out: W, trace: &Trace) -> std::io::Result<()> {
    let mut w = writer(out);
    w.write_record(TRACE_COLUMNS).map_err(io_error)?;
    let mut row: Vec<String> = Vec::with_capacity(TRACE_COLUMNS.len());
    for s in &trace.samples {
        row.clear();
        row.push(fmt_f64(s.t));
        row.push(s.mode.number().to_string());
        row.extend(s.i_l.iter().chain(&s.v_c).map(|&v| fmt_f64(v)));
        row.push(fmt_f64(s.v_o));
        row.push(fmt_f64(s.i_o));
        row.extend(s.i_d.iter().map(|&v| fmt_f64(v)));
        row.push(fmt_f64(s.i_q));
        w.write_record(&row).map_err(io_error)?;
    }
    flush(w)
}

/// One `d` column, then one column per topology for each metric group:
/// `gain.<id>`, `switch_stress.<id>`, `diode_stress.<id>`.
pub fn write_comparison_csv<W: Write>(out: W, table: &ComparisonTable) -> std::io::Result<()> {
    let mut w = writer(out);
    let mut header = vec!["d".to_string()];
    for group in ["gain", "switch_stress", "diode_stress"] {
        header.extend(table.topologies.iter().map(|t| format!("{group}.{}", t.id)));
    }
    w.write_record(&header).map_err(io_error)?;
    for (i, &d) in table.duty.iter().enumerate() {
        let mut row = vec![fmt_f64(d)];
        row.extend(table.topologies.iter().map(|t| fmt_f64(t.gain[i])));
        row.extend(table.topologies.iter().map(|t| fmt_f64(t.switch_stress[i])));
        row.extend(table.topologies.iter().map(|t| fmt_f64(t.diode_stress[i])));
        w.write_record(&row).map_err(io_error)?;
    }
    flush(w)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Warning {
    pub component: String,
    pub message: String,
}

impl From<hgvm_core::designer::DesignWarning> for Warning {
    fn from(w: hgvm_core::designer::DesignWarning) -> Self {
        Warning {
            component: w.component,
            message: w.message,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorInfo {
    pub category: &'static str,
    pub message: String,
}

impl From<&CliError> for ErrorInfo {
    fn from(e: &CliError) -> Self {
        ErrorInfo {
            category: e.category(),
            message: e.to_string(),
        }
    }
}

/// Envelope shared by every command's JSON output. Key order follows the
/// field order, so identical runs serialise byte-for-byte identically.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport<I: Serialize, R: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub status: &'static str,
    pub exit_code: i32,
    pub inputs: I,
    pub results: Option<R>,
    pub warnings: Vec<Warning>,
    pub error: Option<ErrorInfo>,
}

impl<I: Serialize, R: Serialize> RunReport<I, R> {
    pub fn new(
        command: &'static str,
        inputs: I,
        outcome: Result<R, &CliError>,
        warnings: Vec<Warning>,
    ) -> Self {
        let (status, exit_code, results, error) = match outcome {
            Ok(r) => ("ok", crate::EXIT_OK, Some(r), None),
            Err(e) => ("error", e.exit_code(), None, Some(ErrorInfo::from(e))),
        };
        RunReport {
            tool: "hgvm",
            version: env!("CARGO_PKG_VERSION"),
            command,
            status,
            exit_code,
            inputs,
            results,
            warnings,
            error,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report types serialise infallibly");
        s.push('\n');
        s
    }
}

pub fn write_file(path: &std::path::Path, contents: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Writes through a buffered file handle, mapping I/O errors to the path.
pub fn write_with<F>(path: &std::path::Path, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut std::io::BufWriter<std::fs::File>) -> std::io::Result<()>,
{
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut buf = std::io::BufWriter::new(file);
    f(&mut buf)
        .and_then(|_| buf.flush())
        .map_err(|e| CliError::io(path, e))
}
