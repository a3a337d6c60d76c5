//! CSV ingestion into a [`SeriesMatrix`].

use std::io::Read;
use std::path::Path;

use tvvar_core::algebra::Mat;
use tvvar_core::SeriesMatrix;

use crate::error::{CliError, CliResult};

/// Fewer data rows than this is rejected outright.
pub const MIN_ROWS: usize = 30;

const LABEL_HEADERS: &[&str] = &["date", "time", "period", "quarter", "month", "year", "obs", "index"];
const MISSING: &[&str] = &["", "na", "n/a", "nan", "null", ".", "-"];

pub fn ingest_csv(path: &Path) -> CliResult<SeriesMatrix> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::data(format!("cannot open {}: {e}", path.display())))?;
    ingest_reader(file)
}

/// Reads a headed CSV. A first column named like a date, or holding no
/// numeric cell at all, is kept as row labels.
pub fn ingest_reader<R: Read>(reader: R) -> CliResult<SeriesMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::data(format!("cannot read header row: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(CliError::data("missing header row"));
    }
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::data(format!("malformed CSV: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line());
        records.push((line, rec));
    }
    if records.len() < MIN_ROWS {
        return Err(CliError::data(format!(
            "series too short: {} data rows, need at least {MIN_ROWS}",
            records.len()
        )));
    }

    let first_is_label = headers.len() > 1
        && (LABEL_HEADERS.contains(&headers[0].to_ascii_lowercase().as_str())
            || records.iter().all(|(_, r)| parse_cell(&r[0]).is_none()));
    let start = usize::from(first_is_label);
    let names: Vec<String> = headers[start..].to_vec();
    if let Some(i) = names.iter().position(String::is_empty) {
        return Err(CliError::data(format!("empty header for column {}", start + i + 1)));
    }

    let mut data = Vec::with_capacity(records.len() * names.len());
    let mut labels = Vec::new();
    for (line, rec) in &records {
        if first_is_label {
            labels.push(rec[0].to_string());
        }
        for (j, name) in names.iter().enumerate() {
            let cell = &rec[start + j];
            match parse_cell(cell) {
                Some(v) => data.push(v),
                None if MISSING.contains(&cell.to_ascii_lowercase().as_str()) => {
                    return Err(CliError::data(format!(
                        "missing value {cell:?} at line {line}, column {} ({name})",
                        start + j + 1
                    )))
                }
                None => {
                    return Err(CliError::data(format!(
                        "non-numeric value {cell:?} at line {line}, column {} ({name})",
                        start + j + 1
                    )))
                }
            }
        }
    }
    let values = Mat::from_row_major(records.len(), names.len(), data)?;
    let series = SeriesMatrix::new(values, names)?;
    if first_is_label {
        Ok(series.with_labels(labels)?)
    } else {
        Ok(series)
    }
}

fn parse_cell(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}
