//! Row types of the CSV schemas and a reader that reports file, line and
//! column on failure. The same types serialise the service payloads.

use std::fs::File;
use std::path::Path;

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationRecord {
    pub id: String,
    #[serde(default)]
    pub name: Option<String>,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityRecord {
    pub location_id: String,
    pub bed_type: String,
    pub beds: f64,
    #[serde(default)]
    pub covid_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusRecord {
    pub location_id: String,
    pub date: NaiveDate,
    pub group: String,
    pub active: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissionRecord {
    pub location_id: String,
    pub date: NaiveDate,
    pub group: String,
    pub admissions: f64,
    #[serde(default)]
    pub dev_lower: Option<f64>,
    #[serde(default)]
    pub dev_upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NurseRecord {
    pub location_id: String,
    pub nurses: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialRecord {
    pub location_id: String,
    pub group: String,
    pub census: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DischargeRecord {
    pub location_id: String,
    pub date: NaiveDate,
    pub group: String,
    pub discharges: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub from_id: String,
    pub to_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupplyRecord {
    pub location_id: String,
    pub date: NaiveDate,
    pub supply: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferRecord {
    pub group: String,
    pub from: String,
    pub to: String,
    pub date: NaiveDate,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceTransferRecord {
    pub from: String,
    pub to: String,
    pub date: NaiveDate,
    pub amount: f64,
}

pub(crate) fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub(crate) fn parse_error(file: &str, line: u64, column: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        file: file.to_string(),
        line,
        column: column.to_string(),
        message: message.into(),
    }
}

/// A parsed row with its 1-based line number in the file.
#[derive(Debug, Clone)]
pub(crate) struct Row<T> {
    pub line: u64,
    pub value: T,
}

/// Reads every row of `path`. Missing `required` headers fail on line 1.
pub(crate) fn read_rows<T: DeserializeOwned>(path: &Path, required: &[&str]) -> Result<Vec<Row<T>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_rows_from(file, &file_label(path), required)
}

pub(crate) fn read_rows_from<T: DeserializeOwned>(
    input: impl std::io::Read,
    label: &str,
    required: &[&str],
) -> Result<Vec<Row<T>>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| parse_error(label, 1, "", format!("unreadable header: {e}")))?
        .clone();
    for col in required {
        if !headers.iter().any(|h| h == *col) {
            return Err(parse_error(label, 1, col, "required column missing"));
        }
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(label, &headers, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let value = rec
            .deserialize::<T>(Some(&headers))
            .map_err(|e| csv_error(label, &headers, e))
            .map_err(|e| match e {
                Error::Parse { file, column, message, .. } => {
                    // custom field errors (dates) carry no field index
                    let column = if column.is_empty() { bad_date_column(&headers, &rec) } else { column };
                    Error::Parse { file, line, column, message }
                }
                other => other,
            })?;
        rows.push(Row { line, value });
    }
    Ok(rows)
}

fn bad_date_column(headers: &csv::StringRecord, rec: &csv::StringRecord) -> String {
    headers
        .iter()
        .zip(rec.iter())
        .find(|(h, v)| *h == "date" && v.parse::<NaiveDate>().is_err())
        .map(|(h, _)| h.to_string())
        .unwrap_or_default()
}

fn csv_error(label: &str, headers: &csv::StringRecord, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => {
            let column = err
                .field()
                .and_then(|f| headers.get(f as usize))
                .unwrap_or("")
                .to_string();
            parse_error(label, line, &column, err.kind().to_string())
        }
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => parse_error(
            label,
            line,
            "",
            format!("expected {expected_len} fields, found {len}"),
        ),
        _ => parse_error(label, line, "", e.to_string()),
    }
}

/// Writes rows with a header, even when there are none.
pub(crate) fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| io_from_csv(path, e))?;
    w.write_record(header).map_err(|e| io_from_csv(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_from_csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn io_from_csv(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}
