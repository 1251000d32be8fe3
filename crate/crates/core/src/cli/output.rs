//! CSV schemas and the plain-text report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::ensemble::{loglog_slope, SampleResult, SummaryRow, TailDiagnostic};
use crate::error::{Error, Result};

pub const SAMPLES_HEADER: [&str; 6] = ["sample_index", "seed", "N", "x_manybody", "x_hartree", "y"];
pub const SUMMARY_HEADER: [&str; 6] = [
    "N",
    "mean_x_manybody",
    "mean_x_hartree",
    "mean_y",
    "ci95_y",
    "samples",
];

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io {
        path: "<csv>".into(),
        source: std::io::Error::other(e),
    }
}

fn finish(writer: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    writer
        .into_inner()
        .map_err(|e| csv_error(e.into_error().into()))
}

/// `samples.csv`: one row per (sample, N), sample_index then N ascending.
pub fn samples_csv(results: &[SampleResult]) -> Result<Vec<u8>> {
    let mut sorted: Vec<&SampleResult> = results.iter().collect();
    sorted.sort_by_key(|r| r.sample_index);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SAMPLES_HEADER).map_err(csv_error)?;
    for r in sorted {
        for (&n, &x) in &r.x_manybody {
            w.write_record([
                r.sample_index.to_string(),
                r.seed.to_string(),
                n.to_string(),
                format_real(x),
                format_real(r.x_hartree),
                format_real(r.y[&n]),
            ])
            .map_err(csv_error)?;
        }
    }
    finish(w)
}

pub fn summary_csv(rows: &[SummaryRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_HEADER).map_err(csv_error)?;
    for r in rows {
        w.write_record([
            r.particles.to_string(),
            format_real(r.mean_x_manybody),
            format_real(r.mean_x_hartree),
            format_real(r.mean_y),
            format_real(r.ci95_y),
            r.samples.to_string(),
        ])
        .map_err(csv_error)?;
    }
    finish(w)
}

fn parse_field<T: std::str::FromStr>(record: &csv::StringRecord, i: usize, name: &str) -> Result<T> {
    record
        .get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Domain(format!("cannot parse column {name} in {record:?}")))
}

fn check_header(reader: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<()> {
    let header = reader.headers().map_err(csv_error)?;
    if !header.iter().eq(expected.iter().copied()) {
        return Err(Error::Domain(format!("unexpected CSV header {header:?}")));
    }
    Ok(())
}

/// Parse `samples.csv` back into per-sample results.
pub fn parse_samples_csv(bytes: &[u8]) -> Result<Vec<SampleResult>> {
    let mut reader = csv::Reader::from_reader(bytes);
    check_header(&mut reader, &SAMPLES_HEADER)?;
    let mut by_index: BTreeMap<usize, SampleResult> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let index: usize = parse_field(&record, 0, "sample_index")?;
        let seed: u64 = parse_field(&record, 1, "seed")?;
        let n: usize = parse_field(&record, 2, "N")?;
        let x: f64 = parse_field(&record, 3, "x_manybody")?;
        let xh: f64 = parse_field(&record, 4, "x_hartree")?;
        let y: f64 = parse_field(&record, 5, "y")?;
        let entry = by_index.entry(index).or_insert_with(|| SampleResult {
            sample_index: index,
            seed,
            x_hartree: xh,
            x_manybody: BTreeMap::new(),
            y: BTreeMap::new(),
        });
        entry.x_manybody.insert(n, x);
        entry.y.insert(n, y);
    }
    Ok(by_index.into_values().collect())
}

pub fn parse_summary_csv(bytes: &[u8]) -> Result<Vec<SummaryRow>> {
    let mut reader = csv::Reader::from_reader(bytes);
    check_header(&mut reader, &SUMMARY_HEADER)?;
    reader
        .records()
        .map(|record| {
            let record = record.map_err(csv_error)?;
            Ok(SummaryRow {
                particles: parse_field(&record, 0, "N")?,
                mean_x_manybody: parse_field(&record, 1, "mean_x_manybody")?,
                mean_x_hartree: parse_field(&record, 2, "mean_x_hartree")?,
                mean_y: parse_field(&record, 3, "mean_y")?,
                ci95_y: parse_field(&record, 4, "ci95_y")?,
                samples: parse_field(&record, 5, "samples")?,
            })
        })
        .collect()
}

pub fn read_samples_csv(path: &Path) -> Result<Vec<SampleResult>> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_samples_csv(&bytes)
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_summary_csv(&bytes)
}

/// Inputs to [`report_text`].
pub struct ReportInputs<'a> {
    pub header: &'a str,
    pub observable_norm: f64,
    pub rows: &'a [SummaryRow],
    pub tail: &'a TailDiagnostic,
    pub bound_tail: &'a TailDiagnostic,
    pub max_abs_manybody: f64,
    pub max_abs_hartree: f64,
}

pub fn strictly_decreasing(rows: &[SummaryRow]) -> bool {
    rows.windows(2).all(|w| w[1].mean_y < w[0].mean_y)
}

pub fn report_text(r: &ReportInputs<'_>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "mean-field convergence report");
    let _ = writeln!(out, "{}", r.header);
    let _ = writeln!(out, "operator norm ||a|| = {:.12}", r.observable_norm);
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:>4}  {:>22}  {:>22}  {:>22}  {:>22}  {:>7}",
        "N", "mean_x_manybody", "mean_x_hartree", "mean_y", "ci95_y", "samples"
    );
    for row in r.rows {
        let _ = writeln!(
            out,
            "{:>4}  {:>22.12e}  {:>22.12e}  {:>22.12e}  {:>22.12e}  {:>7}",
            row.particles, row.mean_x_manybody, row.mean_x_hartree, row.mean_y, row.ci95_y, row.samples
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "mean_y strictly decreasing in N: {}",
        if strictly_decreasing(r.rows) { "yes" } else { "no" }
    );
    match loglog_slope(r.rows) {
        Some(s) => {
            let _ = writeln!(out, "log-log slope of mean_y vs N (informational): {s:.6}");
        }
        None => {
            let _ = writeln!(out, "log-log slope of mean_y vs N (informational): n/a");
        }
    }
    let _ = writeln!(out);
    for tail in [r.tail, r.bound_tail] {
        let _ = writeln!(out, "tail diagnostic E(|X| 1{{|X| >= beta}}), beta = {:.12e}", tail.beta);
        let _ = writeln!(out, "  hartree: {:.12e}", tail.hartree);
        for (n, v) in &tail.manybody {
            let _ = writeln!(out, "  N = {n}: {v:.12e}");
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "pathwise bound: max |X_N| = {:.12e}, max |X| = {:.12e}, ||a|| = {:.12e}",
        r.max_abs_manybody, r.max_abs_hartree, r.observable_norm
    );
    out
}
