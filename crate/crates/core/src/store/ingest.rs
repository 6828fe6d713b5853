use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use chrono_tz::Tz;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::schema::SchemaConfig;
use super::table::{ReadingTable, TableBuilder};
use super::time::Hour;
use super::StoreError;

/// Line-level error samples retained per file.
pub const MAX_ERROR_SAMPLES: usize = 100;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: u64,
    pub rows_accepted: u64,
    pub rows_rejected: u64,
    pub duplicate_rows: u64,
    /// NaN/inf cells read as null.
    pub nonfinite_cells: u64,
    pub files: Vec<FileReport>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FileReport {
    pub path: String,
    pub rows_read: u64,
    pub rows_rejected: u64,
    pub nonfinite_cells: u64,
    pub errors: Vec<LineError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineError {
    pub line: u64,
    pub message: String,
}

/// Parses meter-reading CSV files into a sorted, de-duplicated table.
///
/// Files are parsed in parallel and merged in the order given, so for a
/// repeated (timestamp, meter) key the occurrence in the later file (or the
/// later line of the same file) wins. Malformed rows are counted and
/// skipped; an unreadable file or a missing required header is fatal.
pub fn load_csv<P: AsRef<Path> + Sync>(
    paths: &[P],
    schema: &SchemaConfig,
) -> Result<(ReadingTable, IngestReport), StoreError> {
    schema.validate()?;
    let zone = schema.timezone()?;
    let parsed: Vec<Result<(TableBuilder, FileReport), StoreError>> = paths
        .par_iter()
        .map(|p| parse_file(p.as_ref(), schema, zone))
        .collect();

    let mut report = IngestReport::default();
    let mut merged = TableBuilder::new(&schema.columns);
    for result in parsed {
        let (builder, file_report) = result?;
        report.rows_read += file_report.rows_read;
        report.rows_rejected += file_report.rows_rejected;
        report.nonfinite_cells += file_report.nonfinite_cells;
        report.files.push(file_report);
        if merged.is_empty() {
            merged = builder;
        } else {
            merged.append(builder);
        }
    }
    let (table, duplicates) = merged.build();
    report.duplicate_rows = duplicates as u64;
    report.rows_accepted = table.row_count() as u64;
    debug_assert_eq!(
        report.rows_read,
        report.rows_accepted + report.rows_rejected + report.duplicate_rows
    );
    if report.nonfinite_cells > 0 {
        tracing::warn!(
            cells = report.nonfinite_cells,
            "non-finite values read as null"
        );
    }
    if report.rows_rejected > 0 {
        tracing::warn!(rows = report.rows_rejected, "malformed rows rejected");
    }
    Ok((table, report))
}

fn parse_file(
    path: &Path,
    schema: &SchemaConfig,
    zone: Tz,
) -> Result<(TableBuilder, FileReport), StoreError> {
    let io_err = |source| StoreError::Io {
        path: path.to_owned(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(true)
        .from_reader(BufReader::with_capacity(1 << 20, file));
    let headers = reader
        .byte_headers()
        .map_err(|e| StoreError::Csv {
            path: path.to_owned(),
            message: e.to_string(),
        })?
        .clone();
    let header_names: Vec<String> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let h = String::from_utf8_lossy(h);
            let h = if i == 0 {
                h.trim_start_matches('\u{feff}')
            } else {
                &h
            };
            h.trim().to_owned()
        })
        .collect();
    let find = |wanted: &str| {
        header_names
            .iter()
            .position(|h| h == wanted)
            .ok_or_else(|| {
                StoreError::Schema(format!(
                    "{}: required column {wanted:?} not found in header",
                    path.display()
                ))
            })
    };
    let ts_idx = find(&schema.headers.timestamp)?;
    let meter_idx = find(&schema.headers.meter_id)?;
    let value_idx: Vec<usize> = schema
        .columns
        .iter()
        .map(|c| find(c.source_header()))
        .collect::<Result<_, _>>()?;

    let sentinels: Vec<&[u8]> = schema.null_sentinels.iter().map(|s| s.as_bytes()).collect();
    let mut builder = TableBuilder::new(&schema.columns);
    let mut report = FileReport {
        path: path.display().to_string(),
        ..FileReport::default()
    };
    let mut record = csv::ByteRecord::new();
    let mut row_values = vec![0.0f64; value_idx.len()];
    let mut last_stamp: Vec<u8> = Vec::new();
    let mut last_hour: Option<Hour> = None;

    loop {
        match reader.read_byte_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                if let csv::ErrorKind::Io(_) = e.kind() {
                    return Err(StoreError::Csv {
                        path: path.to_owned(),
                        message: e.to_string(),
                    });
                }
                report.rows_read += 1;
                reject(
                    &mut report,
                    e.position().map_or(0, |p| p.line()),
                    e.to_string(),
                );
                continue;
            }
        }
        report.rows_read += 1;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header_names.len() {
            reject(
                &mut report,
                line,
                format!(
                    "expected {} fields, found {}",
                    header_names.len(),
                    record.len()
                ),
            );
            continue;
        }

        let stamp = trim_ascii(&record[ts_idx]);
        let hour = if let Some(h) = last_hour.filter(|_| stamp == last_stamp.as_slice()) {
            h
        } else {
            let parsed = std::str::from_utf8(stamp)
                .map_err(|_| "timestamp is not valid UTF-8".to_string())
                .and_then(|s| Hour::parse(s, zone).map_err(|e| e.to_string()));
            match parsed {
                Ok(h) => {
                    last_stamp.clear();
                    last_stamp.extend_from_slice(stamp);
                    last_hour = Some(h);
                    h
                }
                Err(msg) => {
                    reject(&mut report, line, msg);
                    continue;
                }
            }
        };

        let meter = match std::str::from_utf8(trim_ascii(&record[meter_idx])) {
            Ok("") => {
                reject(&mut report, line, "empty meter id".into());
                continue;
            }
            Ok(id) => id,
            Err(_) => {
                reject(&mut report, line, "meter id is not valid UTF-8".into());
                continue;
            }
        };

        let mut nonfinite = 0;
        let mut bad: Option<String> = None;
        for (slot, (&idx, spec)) in row_values
            .iter_mut()
            .zip(value_idx.iter().zip(&schema.columns))
        {
            let field = trim_ascii(&record[idx]);
            if field.is_empty() || sentinels.contains(&field) {
                *slot = f64::NAN;
                continue;
            }
            match std::str::from_utf8(field)
                .ok()
                .and_then(|s| s.parse::<f64>().ok())
            {
                Some(v) if v.is_finite() => *slot = v,
                Some(_) => {
                    *slot = f64::NAN;
                    nonfinite += 1;
                }
                None => {
                    bad = Some(format!(
                        "invalid number {:?} in column {:?}",
                        String::from_utf8_lossy(field),
                        spec.name
                    ));
                    break;
                }
            }
        }
        if let Some(msg) = bad {
            reject(&mut report, line, msg);
            continue;
        }
        report.nonfinite_cells += nonfinite;
        let meter = builder.intern_meter(meter);
        builder.push_raw(hour, meter, &row_values);
    }
    Ok((builder, report))
}

fn reject(report: &mut FileReport, line: u64, message: String) {
    report.rows_rejected += 1;
    if report.errors.len() < MAX_ERROR_SAMPLES {
        report.errors.push(LineError { line, message });
    }
}

fn trim_ascii(bytes: &[u8]) -> &[u8] {
    bytes.trim_ascii()
}
