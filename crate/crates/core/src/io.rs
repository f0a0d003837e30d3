//! Plain-text artifact formats: CSV grids, measurement logs, trajectory and
//! report tables, gain maps, and hyperparameter JSON.
//!
//! Grid-shaped CSVs have `ny` rows of `nx` comma-separated values with no
//! header; the cell in row `iy`, column `ix` holds the value at flat index
//! `ix + nx * iy`, matching the site indexing used everywhere else. Floats
//! are written with Rust's shortest round-trip formatting, so write → read →
//! write reproduces files byte for byte. Readers fail fast with 1-based line
//! numbers on ragged rows, non-finite values, or malformed records.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::evaluation::GainMap;
use crate::geometry::Link;
use crate::synthesis::{HyperParams, MeasurementSet};

/// Header of the measurement log.
const MEASUREMENT_HEADER: &str = "tau,tx,rx,shadowing";
/// Header of the adaptive trajectory table.
const TRAJECTORY_HEADER: &str = "slot,t,elbo_final,labeling_error,selected_pairs";
/// Header of the Monte-Carlo report table.
const REPORT_HEADER: &str = "slot,metric,mean,std";
/// Header of the bound trace.
const ELBO_HEADER: &str = "iteration,elbo";

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Writes a real-valued grid as `ny` rows of `nx` values.
pub fn write_field_csv<W: Write>(w: &mut W, nx: usize, ny: usize, values: &[f64]) -> Result<()> {
    if values.len() != nx * ny {
        return Err(Error::dims(nx * ny, values.len(), "grid value count"));
    }
    for iy in 0..ny {
        let row: Vec<String> = (0..nx).map(|ix| format!("{}", values[ix + nx * iy])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Reads a real-valued grid; returns `(nx, ny, values)` in flat-index order.
pub fn read_field_csv<R: BufRead>(r: R) -> Result<(usize, usize, Vec<f64>)> {
    let mut nx = 0;
    let mut values = Vec::new();
    let mut rows = 0;
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let row: Vec<&str> = line.split(',').collect();
        if rows == 0 {
            nx = row.len();
        } else if row.len() != nx {
            return Err(parse_err(
                idx + 1,
                format!("expected {nx} columns, found {}", row.len()),
            ));
        }
        for cell in row {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| parse_err(idx + 1, format!("not a number: {cell:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(idx + 1, format!("non-finite value: {cell:?}")));
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(parse_err(1, "empty grid file"));
    }
    Ok((nx, rows, values))
}

/// Writes an integer label grid as `ny` rows of `nx` values.
pub fn write_label_csv<W: Write>(w: &mut W, nx: usize, ny: usize, labels: &[usize]) -> Result<()> {
    if labels.len() != nx * ny {
        return Err(Error::dims(nx * ny, labels.len(), "grid label count"));
    }
    for iy in 0..ny {
        let row: Vec<String> = (0..nx).map(|ix| format!("{}", labels[ix + nx * iy])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Reads an integer label grid; returns `(nx, ny, labels)` in flat-index order.
pub fn read_label_csv<R: BufRead>(r: R) -> Result<(usize, usize, Vec<usize>)> {
    let mut nx = 0;
    let mut labels = Vec::new();
    let mut rows = 0;
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let row: Vec<&str> = line.split(',').collect();
        if rows == 0 {
            nx = row.len();
        } else if row.len() != nx {
            return Err(parse_err(
                idx + 1,
                format!("expected {nx} columns, found {}", row.len()),
            ));
        }
        for cell in row {
            let v: usize = cell
                .trim()
                .parse()
                .map_err(|_| parse_err(idx + 1, format!("not a label: {cell:?}")))?;
            labels.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(parse_err(1, "empty label file"));
    }
    Ok((nx, rows, labels))
}

/// Writes the measurement log: one row per measurement in acquisition order,
/// with 0-based measurement and sensor indices.
pub fn write_measurement_log<W: Write>(w: &mut W, data: &MeasurementSet) -> Result<()> {
    writeln!(w, "{MEASUREMENT_HEADER}")?;
    for (tau, (link, s)) in data.links().iter().zip(data.shadowing()).enumerate() {
        writeln!(w, "{tau},{},{},{}", link.tx, link.rx, s)?;
    }
    Ok(())
}

/// Reads a measurement log back as `(link, shadowing)` rows in file order.
///
/// The `tau` column must count 0, 1, 2, ... so truncated or reordered files
/// are rejected.
pub fn read_measurement_log<R: BufRead>(r: R) -> Result<Vec<(Link, f64)>> {
    let mut lines = r.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(parse_err(1, "empty measurement log"));
    };
    let header = header?;
    if header.trim() != MEASUREMENT_HEADER {
        return Err(parse_err(
            1,
            format!("expected header {MEASUREMENT_HEADER:?}, found {header:?}"),
        ));
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 4 {
            return Err(parse_err(
                idx + 1,
                format!("expected 4 columns, found {}", cells.len()),
            ));
        }
        let tau: usize = cells[0]
            .trim()
            .parse()
            .map_err(|_| parse_err(idx + 1, format!("bad index: {:?}", cells[0])))?;
        if tau != records.len() {
            return Err(parse_err(
                idx + 1,
                format!("expected measurement index {}, found {tau}", records.len()),
            ));
        }
        let tx: usize = cells[1]
            .trim()
            .parse()
            .map_err(|_| parse_err(idx + 1, format!("bad sensor index: {:?}", cells[1])))?;
        let rx: usize = cells[2]
            .trim()
            .parse()
            .map_err(|_| parse_err(idx + 1, format!("bad sensor index: {:?}", cells[2])))?;
        let s: f64 = cells[3]
            .trim()
            .parse()
            .map_err(|_| parse_err(idx + 1, format!("bad shadowing value: {:?}", cells[3])))?;
        if !s.is_finite() {
            return Err(parse_err(idx + 1, format!("non-finite shadowing: {:?}", cells[3])));
        }
        let link = Link::new(tx, rx).map_err(|e| parse_err(idx + 1, e.to_string()))?;
        records.push((link, s));
    }
    Ok(records)
}

/// Writes a gain map grid; undefined entries (transmitter on the receiver)
/// become empty cells.
pub fn write_gain_map_csv<W: Write>(w: &mut W, map: &GainMap) -> Result<()> {
    if map.values.len() != map.nx * map.ny {
        return Err(Error::dims(map.nx * map.ny, map.values.len(), "gain map size"));
    }
    for iy in 0..map.ny {
        let row: Vec<String> = (0..map.nx)
            .map(|ix| match map.values[ix + map.nx * iy] {
                Some(g) => format!("{g}"),
                None => String::new(),
            })
            .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Writes the evidence-bound trace, one row per completed cycle.
pub fn write_elbo_trace_csv<W: Write>(w: &mut W, trace: &[f64]) -> Result<()> {
    writeln!(w, "{ELBO_HEADER}")?;
    for (i, v) in trace.iter().enumerate() {
        writeln!(w, "{i},{v}")?;
    }
    Ok(())
}

/// One adaptive slot in the trajectory table.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub slot: usize,
    /// Measurements held after this slot.
    pub t: usize,
    pub elbo_final: f64,
    /// Absent when no ground truth is available (replayed real data).
    pub labeling_error: Option<f64>,
    /// Pairs acquired entering this slot (empty for the initial fit).
    pub selected: Vec<Link>,
}

/// Writes the adaptive trajectory; selected pairs are `tx-rx` tokens joined
/// by `;` so the cell stays comma-free.
pub fn write_trajectory_csv<W: Write>(w: &mut W, rows: &[TrajectoryRow]) -> Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for row in rows {
        let pairs: Vec<String> = row
            .selected
            .iter()
            .map(|l| format!("{}-{}", l.tx, l.rx))
            .collect();
        let err = match row.labeling_error {
            Some(e) => format!("{e}"),
            None => String::new(),
        };
        writeln!(
            w,
            "{},{},{},{},{}",
            row.slot,
            row.t,
            row.elbo_final,
            err,
            pairs.join(";")
        )?;
    }
    Ok(())
}

/// One aggregated metric in the Monte-Carlo report.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ReportRow {
    pub slot: usize,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
}

/// Writes the per-slot metric summary table.
pub fn write_report_csv<W: Write>(w: &mut W, rows: &[ReportRow]) -> Result<()> {
    writeln!(w, "{REPORT_HEADER}")?;
    for row in rows {
        writeln!(w, "{},{},{},{}", row.slot, row.metric, row.mean, row.std)?;
    }
    Ok(())
}

/// Machine-readable companion of the report table.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ReportSummary {
    pub n_runs: usize,
    pub n_failures: usize,
    pub rows: Vec<ReportRow>,
}

/// Serializes the report summary as pretty-printed JSON.
pub fn write_report_json<W: Write>(w: &mut W, summary: &ReportSummary) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, summary)?;
    writeln!(w)?;
    Ok(())
}

/// Serializes estimated hyperparameters as pretty-printed JSON.
pub fn write_theta_json<W: Write>(w: &mut W, theta: &HyperParams) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, theta)?;
    writeln!(w)?;
    Ok(())
}

/// Reads hyperparameters back, re-validating their domains.
pub fn read_theta_json(text: &str) -> Result<HyperParams> {
    let raw: HyperParams = serde_json::from_str(text)?;
    HyperParams::new(raw.noise_precision, raw.class_means, raw.class_precisions)
}
