//! Text formats: CSV tables, click logs, hardware timestamp logs and the fit
//! report. Everything is newline-delimited UTF-8; `#` lines are comments.
//!
//! Files are written to a temporary sibling and renamed into place, so an
//! existing output path always holds a complete file.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::estimation::PowerLawFit;
use crate::experiments::{
    AppPoint, AppSeries, DcrCell, DcrTable, DelayCurve, DelayPoint, JitterRow, JitterSurface,
};
use crate::sim::ClickRecord;

pub const CLICK_LOG_HEADER: &str = "gate_index,raw_timestamp_ps,tdc_bin,outcome,quench_ps";
pub const DELAY_CURVE_HEADER: &str = "delay_ns,counts_hz,photon_hz,dark_hz,afterpulse_hz";
pub const APP_SERIES_HEADER: &str = "holdoff_us,app,app_sigma";
pub const DCR_TABLE_HEADER: &str = "period_ns,holdoff_us,dcr_hz";
pub const JITTER_SURFACE_HEADER: &str = "delay_ns,bin,count";

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Non-comment, non-blank lines with their 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Splits a CSV body after checking its header; yields `(line, fields)`.
fn csv_rows<'a>(text: &'a str, header: &str) -> Result<Vec<(usize, Vec<&'a str>)>> {
    let mut lines = data_lines(text);
    match lines.next() {
        Some((_, h)) if h == header => {}
        Some((line, h)) => {
            return Err(Error::parse(line, format!("expected header `{header}`, got `{h}`")))
        }
        None => return Err(Error::parse(1, format!("missing header `{header}`"))),
    }
    let width = header.split(',').count();
    lines
        .map(|(line, l)| {
            let fields: Vec<&str> = l.split(',').map(str::trim).collect();
            if fields.len() != width {
                return Err(Error::parse(
                    line,
                    format!("expected {width} fields, got {}", fields.len()),
                ));
            }
            Ok((line, fields))
        })
        .collect()
}

fn field<T: FromStr>(line: usize, name: &str, raw: &str) -> Result<T> {
    raw.parse::<T>()
        .map_err(|_| Error::parse(line, format!("bad {name} `{raw}`")))
}

pub fn render_click_log(clicks: &[ClickRecord]) -> String {
    let mut out = String::with_capacity(32 * (clicks.len() + 1));
    out.push_str(CLICK_LOG_HEADER);
    out.push('\n');
    for c in clicks {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            c.gate_index, c.raw_timestamp_ps, c.tdc_bin, c.outcome, c.quench_ps
        );
    }
    out
}

pub fn parse_click_log(text: &str) -> Result<Vec<ClickRecord>> {
    csv_rows(text, CLICK_LOG_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            Ok(ClickRecord {
                gate_index: field(line, "gate_index", f[0])?,
                raw_timestamp_ps: field(line, "raw_timestamp_ps", f[1])?,
                tdc_bin: field(line, "tdc_bin", f[2])?,
                outcome: field(line, "outcome", f[3])?,
                quench_ps: field(line, "quench_ps", f[4])?,
            })
        })
        .collect()
}

pub fn render_delay_curve(curve: &DelayCurve) -> String {
    let mut out = format!("{DELAY_CURVE_HEADER}\n");
    for p in &curve.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            p.delay_ns, p.counts_hz, p.photon_hz, p.dark_hz, p.afterpulse_hz
        );
    }
    out
}

pub fn parse_delay_curve(text: &str) -> Result<DelayCurve> {
    let points = csv_rows(text, DELAY_CURVE_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            Ok(DelayPoint {
                delay_ns: field(line, "delay_ns", f[0])?,
                counts_hz: field(line, "counts_hz", f[1])?,
                photon_hz: field(line, "photon_hz", f[2])?,
                dark_hz: field(line, "dark_hz", f[3])?,
                afterpulse_hz: field(line, "afterpulse_hz", f[4])?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DelayCurve { points })
}

pub fn render_app_series(series: &AppSeries) -> String {
    let mut out = format!("# series = {}\n{APP_SERIES_HEADER}\n", series.label);
    for p in &series.points {
        let _ = writeln!(out, "{},{},{}", p.holdoff_us, p.app, p.app_sigma);
    }
    out
}

pub fn parse_app_series(text: &str, label: &str) -> Result<AppSeries> {
    let points = csv_rows(text, APP_SERIES_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            let p = AppPoint {
                holdoff_us: field(line, "holdoff_us", f[0])?,
                app: field(line, "app", f[1])?,
                app_sigma: field(line, "app_sigma", f[2])?,
            };
            if !(p.holdoff_us > 0.0) {
                return Err(Error::parse(line, "hold-off must be positive"));
            }
            Ok(p)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AppSeries {
        label: label.to_string(),
        points,
    })
}

/// Series label from a file name: `app_4ns.csv` gives `4ns`.
pub fn series_label(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    stem.strip_prefix("app_").map(str::to_string).unwrap_or(stem)
}

pub fn render_dcr_table(table: &DcrTable) -> String {
    let mut out = format!("{DCR_TABLE_HEADER}\n");
    for c in &table.cells {
        let _ = writeln!(out, "{},{},{}", c.period_ns, c.holdoff_us, c.dcr_hz);
    }
    out
}

pub fn parse_dcr_table(text: &str) -> Result<DcrTable> {
    let cells = csv_rows(text, DCR_TABLE_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            Ok(DcrCell {
                period_ns: field(line, "period_ns", f[0])?,
                holdoff_us: field(line, "holdoff_us", f[1])?,
                dcr_hz: field(line, "dcr_hz", f[2])?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DcrTable { cells })
}

/// Every bin of every row is written, zeros included.
pub fn render_jitter_surface(surface: &JitterSurface) -> String {
    let mut out = format!("# bin_width_ps = {}\n{JITTER_SURFACE_HEADER}\n", surface.bin_width_ps);
    for row in &surface.rows {
        for (bin, count) in row.counts.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", row.delay_ns, bin, count);
        }
    }
    out
}

/// Rows are rebuilt in file order; bins of a row must be contiguous from 0.
pub fn parse_jitter_surface(text: &str, bin_width_ps: f64) -> Result<JitterSurface> {
    let mut rows: Vec<JitterRow> = Vec::new();
    for (line, f) in csv_rows(text, JITTER_SURFACE_HEADER)? {
        let delay_ns: f64 = field(line, "delay_ns", f[0])?;
        let bin: usize = field(line, "bin", f[1])?;
        let count: u64 = field(line, "count", f[2])?;
        let start_new = rows.last().is_none_or(|r| r.delay_ns != delay_ns);
        if start_new {
            rows.push(JitterRow {
                delay_ns,
                counts: Vec::new(),
            });
        }
        let row = rows.last_mut().unwrap();
        if bin != row.counts.len() {
            return Err(Error::parse(
                line,
                format!("expected bin {}, got {bin}", row.counts.len()),
            ));
        }
        row.counts.push(count);
    }
    Ok(JitterSurface {
        bin_width_ps,
        rows,
    })
}

/// One non-negative integer timestamp (ps) per line, non-decreasing.
pub fn read_timestamp_log(text: &str) -> Result<Vec<u64>> {
    let mut out: Vec<u64> = Vec::new();
    for (line, l) in data_lines(text) {
        let ts: u64 = l
            .parse()
            .map_err(|_| Error::parse(line, format!("`{l}` is not a non-negative integer timestamp")))?;
        if let Some(&prev) = out.last() {
            if ts < prev {
                return Err(Error::parse(
                    line,
                    format!("timestamp {ts} ps precedes the previous {prev} ps"),
                ));
            }
        }
        out.push(ts);
    }
    Ok(out)
}

pub fn render_fit_report(fit: &PowerLawFit) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(out, "lambda = {}", fit.lambda);
    for s in &fit.series {
        let _ = writeln!(out, "A0_{} = {}", s.label, s.amplitude);
        let _ = writeln!(out, "d_{} = {}", s.label, s.offset);
    }
    let _ = writeln!(out, "half_life_us = {}", fit.half_life_us()?);
    let _ = writeln!(out, "residual_norm = {}", fit.residual_norm);
    Ok(out)
}

/// Key-value pairs of a fit report, in file order.
pub fn parse_fit_report(text: &str) -> Result<Vec<(String, f64)>> {
    data_lines(text)
        .map(|(line, l)| {
            let (k, v) = l
                .split_once('=')
                .ok_or_else(|| Error::parse(line, "expected `key = value`"))?;
            Ok((k.trim().to_string(), field(line, k.trim(), v.trim())?))
        })
        .collect()
}
