//! Spatio-temporal concentration providers.
//!
//! Every provider answers `c(lat, lon, t)` in ppm. Two are shipped: a dense
//! gridded field read from JSON ([`GridField`]) and an analytic road-plume
//! generator ([`SyntheticField`]) used to build test scenarios.

mod grid;
mod synthetic;

use chrono::NaiveDateTime;
use thiserror::Error;

pub use grid::{GridAxes, GridField};
pub use synthetic::{synthesize, DiurnalWindow, RoadSource, SyntheticField, SyntheticFieldSpec};

use crate::geo::LatLon;
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("query ({lat}, {lon}) at {time} is outside the field bounds")]
    OutOfBounds { lat: f64, lon: f64, time: NaiveDateTime },
    #[error("field parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("invalid field: {0}")]
    Invalid(String),
    #[error("field io error: {0}")]
    Io(String),
}

/// Concentration provider in ppm. Implementations are immutable and may be
/// shared across threads.
pub trait ConcentrationField<S: Scalar>: Send + Sync {
    fn concentration_at(&self, pos: LatLon, time: NaiveDateTime) -> Result<S, FieldError>;
}

impl<S: Scalar, F: ConcentrationField<S> + ?Sized> ConcentrationField<S> for std::sync::Arc<F> {
    fn concentration_at(&self, pos: LatLon, time: NaiveDateTime) -> Result<S, FieldError> {
        (**self).concentration_at(pos, time)
    }
}

impl<S: Scalar, F: ConcentrationField<S> + ?Sized> ConcentrationField<S> for &F {
    fn concentration_at(&self, pos: LatLon, time: NaiveDateTime) -> Result<S, FieldError> {
        (**self).concentration_at(pos, time)
    }
}

/// Spatially and temporally constant field; unbounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformField<S>(pub S);

impl<S: Scalar> ConcentrationField<S> for UniformField<S> {
    fn concentration_at(&self, _pos: LatLon, _time: NaiveDateTime) -> Result<S, FieldError> {
        Ok(self.0)
    }
}

pub(crate) fn minutes_between(from: NaiveDateTime, to: NaiveDateTime) -> f64 {
    (to - from).num_milliseconds() as f64 / 60_000.0
}
