//! Per-minute activity traces and their exposure analytics.

mod analytics;
mod csv_io;

use std::path::Path;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use analytics::{
    classify_location, dose_series, dose_series_with_residuals, exposure_profile, reduction_percent, round_one_decimal, Category,
    CategoryShare, DosePoint, ExposureProfile, ProfileOptions, DEFAULT_PLACE_RADIUS_M,
};
pub use csv_io::{parse_records, write_records, ParseOptions, TRACE_COLUMNS};

use crate::activity::ActivityMode;
use crate::dose::{DoseError, PersonProfile};
use crate::field::FieldError;
use crate::geo::LatLon;
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("trace has no records")]
    EmptyTrace,
    #[error("row {row} (line {line}): {message}")]
    Row { row: usize, line: u64, message: String },
    #[error("row {row}: timestamp {timestamp} is not after the previous record")]
    NonMonotonic { row: usize, timestamp: NaiveDateTime },
    #[error("series has {got} points but the trace has {expected} records")]
    Alignment { expected: usize, got: usize },
    #[error("record {index}: {source}")]
    Field { index: usize, source: FieldError },
    #[error("record {index}: {source}")]
    Dose { index: usize, source: DoseError },
    #[error("invalid trace: {0}")]
    Invalid(String),
    #[error("csv error: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
pub struct ActivityRecord<S> {
    pub timestamp: NaiveDateTime,
    pub activity_mode: ActivityMode,
    pub pos: LatLon,
    /// Energy expenditure computed from MET, kcal/min.
    pub manual_ee: Option<S>,
    /// Energy expenditure reported by a wearable sensor, kcal/min.
    pub sensor_ee: Option<S>,
}

impl<S: Scalar> ActivityRecord<S> {
    pub fn validate(&self) -> Result<(), String> {
        if !self.pos.is_valid() {
            return Err(format!("invalid coordinates ({}, {})", self.pos.lat, self.pos.lon));
        }
        if self.manual_ee.is_none() && self.sensor_ee.is_none() {
            return Err("at least one of manual or sensor EE is required".into());
        }
        for (name, v) in [("manual EE", self.manual_ee), ("sensor EE", self.sensor_ee)] {
            if let Some(v) = v {
                if !(v.is_finite() && v >= S::zero()) {
                    return Err(format!("{name} must be finite and >= 0, got {v}"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Places {
    pub home: LatLon,
    pub work: LatLon,
}

/// Person and anchor places a trace belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
#[serde(deny_unknown_fields)]
pub struct Subject<S> {
    pub person: PersonProfile<S>,
    pub places: Places,
}

impl<S: Scalar> Subject<S> {
    pub fn from_json(text: &str) -> Result<Self, TraceError> {
        let s: Self = serde_json::from_str(text).map_err(|e| TraceError::Invalid(format!("subject file: {e}")))?;
        s.person.validate().map_err(|e| TraceError::Invalid(e.to_string()))?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, TraceError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| TraceError::Invalid(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Missing minutes between two consecutive records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gap {
    pub after: NaiveDateTime,
    pub before: NaiveDateTime,
    pub missing_minutes: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace<S> {
    pub person: PersonProfile<S>,
    pub places: Places,
    pub records: Vec<ActivityRecord<S>>,
}

impl<S: Scalar> Trace<S> {
    pub fn new(subject: Subject<S>, records: Vec<ActivityRecord<S>>) -> Result<Self, TraceError> {
        let trace = Self { person: subject.person, places: subject.places, records };
        trace.validate()?;
        Ok(trace)
    }

    pub fn from_csv(text: &str, subject: Subject<S>, opts: &ParseOptions) -> Result<Self, TraceError> {
        Self::new(subject, parse_records(text, opts)?)
    }

    pub fn validate(&self) -> Result<(), TraceError> {
        self.person.validate().map_err(|e| TraceError::Invalid(e.to_string()))?;
        if self.records.is_empty() {
            return Err(TraceError::EmptyTrace);
        }
        for (i, r) in self.records.iter().enumerate() {
            r.validate().map_err(|message| TraceError::Row { row: i + 1, line: i as u64 + 2, message })?;
            if i > 0 && r.timestamp <= self.records[i - 1].timestamp {
                return Err(TraceError::NonMonotonic { row: i + 1, timestamp: r.timestamp });
            }
        }
        Ok(())
    }

    /// Spacings longer than one minute.
    pub fn gaps(&self) -> Vec<Gap> {
        self.records
            .windows(2)
            .filter_map(|w| {
                let delta = w[1].timestamp - w[0].timestamp;
                (delta.num_seconds() > 60).then(|| Gap {
                    after: w[0].timestamp,
                    before: w[1].timestamp,
                    missing_minutes: (delta.num_seconds() + 59) / 60 - 1,
                })
            })
            .collect()
    }
}
