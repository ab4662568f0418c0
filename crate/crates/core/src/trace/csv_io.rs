use chrono::{DateTime, NaiveDate, NaiveDateTime, NaiveTime};

use super::{ActivityRecord, TraceError};
use crate::geo::LatLon;
use crate::Scalar;

pub const TRACE_COLUMNS: [&str; 6] =
    ["time", "activity_mode", "latitude", "longitude", "manual_ee_kcal_min", "sensor_ee_kcal_min"];

const TIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseOptions {
    /// Date for time-of-day-only timestamps (`HH:MM:SS`).
    pub date: Option<NaiveDate>,
}

fn parse_time(raw: &str, opts: &ParseOptions) -> Result<NaiveDateTime, String> {
    let raw = raw.trim();
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Ok(t);
        }
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(raw) {
        return Ok(t.naive_local());
    }
    for fmt in ["%H:%M:%S", "%H:%M"] {
        if let Ok(t) = NaiveTime::parse_from_str(raw, fmt) {
            return opts
                .date
                .map(|d| d.and_time(t))
                .ok_or_else(|| format!("time-of-day {raw:?} needs a date (pass one with the date option)"));
        }
    }
    Err(format!("unparseable time {raw:?}"))
}

fn parse_number<S: Scalar>(raw: &str, what: &str) -> Result<S, String> {
    let v: f64 = raw.trim().parse().map_err(|_| format!("unparseable {what} {raw:?}"))?;
    if !v.is_finite() {
        return Err(format!("{what} must be finite, got {raw:?}"));
    }
    Ok(S::lit(v))
}

fn parse_optional<S: Scalar>(raw: &str, what: &str) -> Result<Option<S>, String> {
    if raw.trim().is_empty() {
        Ok(None)
    } else {
        parse_number(raw, what).map(Some)
    }
}

/// Parses trace CSV. Columns may appear in any order; all six are required
/// and no others are accepted. Rows are numbered from 1 after the header.
pub fn parse_records<S: Scalar>(text: &str, opts: &ParseOptions) -> Result<Vec<ActivityRecord<S>>, TraceError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| TraceError::Csv(e.to_string()))?.clone();
    if let Some(unknown) = headers.iter().find(|h| !TRACE_COLUMNS.contains(h)) {
        return Err(TraceError::UnknownColumn(unknown.to_string()));
    }
    let mut cols = [0usize; 6];
    for (slot, name) in cols.iter_mut().zip(TRACE_COLUMNS) {
        *slot = headers.iter().position(|h| h == name).ok_or_else(|| TraceError::MissingColumn(name.to_string()))?;
    }
    let mut records: Vec<ActivityRecord<S>> = Vec::new();
    for (n, row) in reader.records().enumerate() {
        let row_no = n + 1;
        let row = row.map_err(|e| TraceError::Csv(format!("row {row_no}: {e}")))?;
        let line = row.position().map_or(row_no as u64 + 1, |p| p.line());
        let err = |message: String| TraceError::Row { row: row_no, line, message };
        let cell = |i: usize| row.get(cols[i]).unwrap_or("");
        let timestamp = parse_time(cell(0), opts).map_err(err)?;
        let activity_mode = cell(1).parse().map_err(err)?;
        let pos = LatLon::new(parse_number::<f64>(cell(2), "latitude").map_err(err)?, parse_number::<f64>(cell(3), "longitude").map_err(err)?);
        let record = ActivityRecord {
            timestamp,
            activity_mode,
            pos,
            manual_ee: parse_optional(cell(4), "manual EE").map_err(err)?,
            sensor_ee: parse_optional(cell(5), "sensor EE").map_err(err)?,
        };
        record.validate().map_err(err)?;
        if let Some(prev) = records.last() {
            if record.timestamp <= prev.timestamp {
                return Err(TraceError::NonMonotonic { row: row_no, timestamp: record.timestamp });
            }
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(TraceError::EmptyTrace);
    }
    Ok(records)
}

/// Canonical CSV rendering with ISO-8601 timestamps.
pub fn write_records<S: Scalar>(records: &[ActivityRecord<S>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRACE_COLUMNS).expect("in-memory csv write");
    let opt = |v: Option<S>| v.map(|v| v.to_string()).unwrap_or_default();
    for r in records {
        w.write_record([
            r.timestamp.format(TIME_FORMAT).to_string(),
            r.activity_mode.to_string(),
            r.pos.lat.to_string(),
            r.pos.lon.to_string(),
            opt(r.manual_ee),
            opt(r.sensor_ee),
        ])
        .expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv output is utf-8")
}
