//! CSV inputs and outputs.
//!
//! Output dialect: comma separated, header row, `.` decimals, LF line
//! endings, fixed decimal places. Identical inputs give identical bytes.

use std::fs;
use std::path::Path;

use csv::{ReaderBuilder, Terminator, Trim, WriterBuilder};
use rfid_harvest_core::gen2sim::{RangeRow, SensitivityRow, TraceRow};
use serde::Deserialize;

use crate::Error;

fn render(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = WriterBuilder::new()
        .terminator(Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    let bytes = w.into_inner().expect("in-memory flush");
    String::from_utf8(bytes).expect("ascii output")
}

pub const SENSITIVITY_HEADER: [&str; 3] = ["freq_mhz", "sensitivity_dbm", "mode"];
pub const RANGE_HEADER: [&str; 3] = ["distance_m", "reads_per_min", "mode"];
pub const TRACE_HEADER: [&str; 4] = ["t_s", "true_c", "decoded_c", "err_c"];
pub const INGEST_HEADER: [&str; 2] = ["freq_mhz", "sensitivity_dbm"];
pub const DUTY_HEADER: [&str; 6] = [
    "inflow_uw",
    "energy_window_uj",
    "charge_time_s",
    "burst_s",
    "cycle_s",
    "reads_per_min",
];

/// `NA` marks a node that never turned on.
pub fn sensitivity_csv(rows: &[SensitivityRow]) -> String {
    render(
        &SENSITIVITY_HEADER,
        rows.iter().map(|r| {
            vec![
                format!("{:.3}", r.frequency.mhz()),
                r.sensitivity
                    .map_or_else(|| "NA".to_string(), |s| format!("{:.2}", s.as_dbm())),
                r.mode.as_str().to_string(),
            ]
        }),
    )
}

pub fn range_csv(rows: &[RangeRow]) -> String {
    render(
        &RANGE_HEADER,
        rows.iter().map(|r| {
            vec![
                format!("{:.2}", r.distance_m),
                format!("{:.2}", r.reads_per_min),
                r.mode.as_str().to_string(),
            ]
        }),
    )
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    render(
        &TRACE_HEADER,
        rows.iter().map(|r| {
            vec![
                format!("{:.3}", r.t_s),
                format!("{:.3}", r.true_c),
                format!("{:.3}", r.decoded_c),
                format!("{:.3}", r.err_c),
            ]
        }),
    )
}

pub fn ingest_csv(rows: &[(f64, f64)]) -> String {
    render(
        &INGEST_HEADER,
        rows.iter()
            .map(|(f, s)| vec![format!("{f:.3}"), format!("{s:.2}")]),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DutyCycleRow {
    pub inflow_uw: f64,
    pub energy_window_uj: f64,
    pub charge_time_s: f64,
    /// Supplying time: task plus standby drain to the cutoff.
    pub burst_s: f64,
    pub cycle_s: f64,
    pub reads_per_min: f64,
}

pub fn duty_cycle_csv(rows: &[DutyCycleRow]) -> String {
    render(
        &DUTY_HEADER,
        rows.iter().map(|r| {
            vec![
                format!("{:.3}", r.inflow_uw),
                format!("{:.4}", r.energy_window_uj),
                format!("{:.4}", r.charge_time_s),
                format!("{:.4}", r.burst_s),
                format!("{:.4}", r.cycle_s),
                format!("{:.2}", r.reads_per_min),
            ]
        }),
    )
}

pub fn write_table(dir: &Path, name: &str, contents: &str) -> Result<std::path::PathBuf, Error> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    ReaderBuilder::new()
        .trim(Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
}

fn read_text(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Deserialize)]
struct TracePoint {
    time_s: f64,
    temp_c: f64,
}

/// Reads a `time_s,temp_c` temperature trace. Any bad row is fatal.
pub fn read_trace(path: &Path) -> Result<Vec<(f64, f64)>, Error> {
    parse_trace(&read_text(path)?, path)
}

pub fn parse_trace(text: &str, path: &Path) -> Result<Vec<(f64, f64)>, Error> {
    let mut rdr = reader(text);
    let mut points = Vec::new();
    for rec in rdr.deserialize::<TracePoint>() {
        let p = rec.map_err(|e| Error::Input {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        points.push((p.time_s, p.temp_c));
    }
    if points.is_empty() {
        return Err(Error::EmptyTrace {
            path: path.to_path_buf(),
        });
    }
    Ok(points)
}

/// One turn-on measurement from a lab campaign.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct MeasurementRow {
    pub freq_mhz: f64,
    pub eirp_on_dbm: f64,
    pub distance_m: f64,
    pub plf: f64,
    pub node_gain_dbi: f64,
}

impl MeasurementRow {
    fn check(&self) -> Result<(), String> {
        let all = [
            self.freq_mhz,
            self.eirp_on_dbm,
            self.distance_m,
            self.plf,
            self.node_gain_dbi,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err("non-finite value".into());
        }
        if self.distance_m <= 0.0 {
            return Err("distance_m must be > 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Measurements {
    pub rows: Vec<(u64, MeasurementRow)>,
    pub skipped: Vec<RowError>,
}

/// Parses a measurement campaign; malformed rows are skipped and recorded.
pub fn read_measurements(path: &Path) -> Result<Measurements, Error> {
    parse_measurements(&read_text(path)?)
}

pub fn parse_measurements(text: &str) -> Result<Measurements, Error> {
    let mut rdr = reader(text);
    let headers = rdr.headers()?.clone();
    let mut out = Measurements::default();
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                out.skipped.push(RowError {
                    line: e.position().map_or(0, |p| p.line()),
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let line = rec.position().map_or(0, |p| p.line());
        match rec.deserialize::<MeasurementRow>(Some(&headers)) {
            Ok(row) => match row.check() {
                Ok(()) => out.rows.push((line, row)),
                Err(reason) => out.skipped.push(RowError { line, reason }),
            },
            Err(e) => out.skipped.push(RowError {
                line,
                reason: e.to_string(),
            }),
        }
    }
    Ok(out)
}
