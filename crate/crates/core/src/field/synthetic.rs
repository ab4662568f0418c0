//! Analytic road-plume field for building scenarios.
//!
//! `c(p, t) = base + m(t) * Σ_roads strength * exp(-dist(p, road) / decay)`
//! where `m(t)` is the multiplier of the diurnal window containing the
//! time of day, or 1 outside every window.

use std::path::Path;

use chrono::{NaiveDateTime, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ConcentrationField, FieldError, GridAxes, GridField};
use crate::geo::{distance_to_polyline_m, LatLon};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
#[serde(deny_unknown_fields)]
pub struct RoadSource<S> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub polyline: Vec<LatLon>,
    /// Added concentration on the road centerline, ppm.
    pub source_strength: S,
    /// e-folding distance away from the road, meters.
    pub cross_decay_m: S,
}

/// Time-of-day window `[start_hour, end_hour)` scaling road contributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
#[serde(deny_unknown_fields)]
pub struct DiurnalWindow<S> {
    pub start_hour: f64,
    pub end_hour: f64,
    pub multiplier: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
#[serde(deny_unknown_fields)]
pub struct SyntheticFieldSpec<S> {
    pub base_ppm: S,
    #[serde(default)]
    pub roads: Vec<RoadSource<S>>,
    #[serde(default)]
    pub diurnal: Vec<DiurnalWindow<S>>,
    #[serde(default)]
    pub noise_seed: u64,
    /// Amplitude of uniform non-negative noise added per node by
    /// [`SyntheticField::synthesize`]; 0 disables it.
    #[serde(default)]
    pub noise_ppm: S,
}

impl<S: Scalar> SyntheticFieldSpec<S> {
    pub fn validate(&self) -> Result<(), FieldError> {
        let bad = |msg: String| Err(FieldError::Invalid(msg));
        if !(self.base_ppm.is_finite() && self.base_ppm >= S::zero()) {
            return bad(format!("base_ppm must be >= 0, got {}", self.base_ppm));
        }
        if !(self.noise_ppm.is_finite() && self.noise_ppm >= S::zero()) {
            return bad(format!("noise_ppm must be >= 0, got {}", self.noise_ppm));
        }
        for (n, road) in self.roads.iter().enumerate() {
            if road.polyline.len() < 2 || !road.polyline.iter().all(LatLon::is_valid) {
                return bad(format!("road {n}: polyline needs at least 2 valid points"));
            }
            if !(road.source_strength.is_finite() && road.source_strength >= S::zero()) {
                return bad(format!("road {n}: source_strength must be >= 0"));
            }
            if !(road.cross_decay_m.is_finite() && road.cross_decay_m > S::zero()) {
                return bad(format!("road {n}: cross_decay_m must be > 0"));
            }
        }
        let mut windows: Vec<_> = self.diurnal.iter().collect();
        windows.sort_by(|a, b| a.start_hour.total_cmp(&b.start_hour));
        for w in &windows {
            if !(0.0..24.0).contains(&w.start_hour) || !(w.end_hour > w.start_hour && w.end_hour <= 24.0) {
                return bad(format!("diurnal window [{}, {}) must lie within a day", w.start_hour, w.end_hour));
            }
            if !(w.multiplier.is_finite() && w.multiplier >= S::zero()) {
                return bad("diurnal multipliers must be >= 0".into());
            }
        }
        if windows.windows(2).any(|p| p[1].start_hour < p[0].end_hour) {
            return bad("diurnal windows overlap".into());
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, FieldError> {
        let spec: Self = serde_json::from_str(text).map_err(|e| FieldError::Parse {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, FieldError> {
        let text = std::fs::read_to_string(path).map_err(|e| FieldError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticField<S> {
    spec: SyntheticFieldSpec<S>,
}

impl<S: Scalar> SyntheticField<S> {
    pub fn new(spec: SyntheticFieldSpec<S>) -> Result<Self, FieldError> {
        spec.validate()?;
        Ok(Self { spec })
    }

    pub fn spec(&self) -> &SyntheticFieldSpec<S> {
        &self.spec
    }

    pub fn multiplier_at(&self, time: NaiveDateTime) -> S {
        let hour = time.num_seconds_from_midnight() as f64 / 3600.0
            + time.nanosecond() as f64 / 3.6e12;
        self.spec
            .diurnal
            .iter()
            .find(|w| hour >= w.start_hour && hour < w.end_hour)
            .map_or(S::one(), |w| w.multiplier)
    }

    pub fn value(&self, pos: LatLon, time: NaiveDateTime) -> S {
        let plume: S = self
            .spec
            .roads
            .iter()
            .map(|road| {
                let d = S::lit(distance_to_polyline_m(pos, &road.polyline));
                road.source_strength * (-d / road.cross_decay_m).exp()
            })
            .sum();
        self.spec.base_ppm + self.multiplier_at(time) * plume
    }

    /// Samples the field onto a grid, adding seeded node noise when
    /// `noise_ppm > 0`.
    pub fn synthesize(&self, axes: GridAxes) -> Result<GridField<S>, FieldError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.noise_seed);
        let noise = self.spec.noise_ppm;
        GridField::from_fn(axes, |p, t| {
            let v = self.value(p, t);
            if noise > S::zero() {
                v + noise * S::lit(rng.random::<f64>())
            } else {
                v
            }
        })
    }
}

/// Samples `spec` onto `axes`.
pub fn synthesize<S: Scalar>(spec: &SyntheticFieldSpec<S>, axes: GridAxes) -> Result<GridField<S>, FieldError> {
    SyntheticField::new(spec.clone())?.synthesize(axes)
}

impl<S: Scalar> ConcentrationField<S> for SyntheticField<S> {
    fn concentration_at(&self, pos: LatLon, time: NaiveDateTime) -> Result<S, FieldError> {
        Ok(self.value(pos, time))
    }
}
