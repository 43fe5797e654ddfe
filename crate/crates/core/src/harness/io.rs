//! Plot-ready time-series CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Result, TcsError};

pub fn timeseries_header(dim: usize) -> String {
    let mut cols = vec!["t", "X", "V", "Tnorm", "E"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    cols.extend((1..=dim).map(|k| format!("xc_{k}")));
    cols.extend((1..=dim).map(|k| format!("vc_{k}")));
    cols.extend(["Tinf", "L", "minT", "maxT"].map(String::from));
    cols.join(",")
}

pub fn format_timeseries(records: &[DiagnosticsRecord]) -> String {
    let dim = records.first().map_or(0, |r| r.x_c.len());
    let mut out = timeseries_header(dim);
    out.push('\n');
    for r in records {
        let mut row: Vec<f64> = vec![r.t, r.x_norm, r.v_norm, r.t_norm, r.energy];
        row.extend(&r.x_c);
        row.extend(&r.v_c);
        row.extend([r.t_inf, r.lyapunov, r.min_t, r.max_t]);
        let cells: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

pub fn write_timeseries(records: &[DiagnosticsRecord], path: &Path) -> Result<()> {
    fs::write(path, format_timeseries(records)).map_err(|e| TcsError::io(path, e))
}

pub fn parse_timeseries(text: &str) -> Result<Vec<DiagnosticsRecord>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| TcsError::TimeSeries {
        line: 1,
        message: "missing header".into(),
    })?;
    let ncols = header.split(',').count();
    if ncols < 11 || (ncols - 9) % 2 != 0 {
        return Err(TcsError::TimeSeries {
            line: 1,
            message: format!("unexpected column count {ncols}"),
        });
    }
    let dim = (ncols - 9) / 2;
    if header.trim() != timeseries_header(dim) {
        return Err(TcsError::TimeSeries {
            line: 1,
            message: format!("header does not match `{}`", timeseries_header(dim)),
        });
    }
    let mut records = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = raw
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| TcsError::TimeSeries {
                line,
                message: e.to_string(),
            })?;
        if vals.len() != ncols {
            return Err(TcsError::TimeSeries {
                line,
                message: format!("expected {ncols} columns, found {}", vals.len()),
            });
        }
        let tail = &vals[5 + 2 * dim..];
        records.push(DiagnosticsRecord {
            t: vals[0],
            x_norm: vals[1],
            v_norm: vals[2],
            t_norm: vals[3],
            energy: vals[4],
            x_c: vals[5..5 + dim].to_vec(),
            v_c: vals[5 + dim..5 + 2 * dim].to_vec(),
            t_inf: tail[0],
            lyapunov: tail[1],
            min_t: tail[2],
            max_t: tail[3],
        });
    }
    Ok(records)
}

pub fn read_timeseries(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    let text = fs::read_to_string(path).map_err(|e| TcsError::io(path, e))?;
    parse_timeseries(&text)
}
