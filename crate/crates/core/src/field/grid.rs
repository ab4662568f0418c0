use std::path::Path;

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::{minutes_between, ConcentrationField, FieldError};
use crate::geo::LatLon;
use crate::Scalar;

/// Index-space slack for queries that land on the outer nodes.
const EDGE_SLACK: f64 = 1e-9;

/// Axes of a regular lat/lon/time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxes {
    pub lat0: f64,
    pub lon0: f64,
    pub dlat: f64,
    pub dlon: f64,
    pub nlat: usize,
    pub nlon: usize,
    pub t0: NaiveDateTime,
    pub dt_minutes: f64,
    pub nt: usize,
}

impl GridAxes {
    /// Smallest grid with the given spacing covering the bounding box and time span.
    pub fn covering(
        south_west: LatLon,
        north_east: LatLon,
        dlat: f64,
        dlon: f64,
        start: NaiveDateTime,
        end: NaiveDateTime,
        dt_minutes: f64,
    ) -> Result<Self, FieldError> {
        if !(dlat > 0.0 && dlon > 0.0 && dt_minutes > 0.0) {
            return Err(FieldError::Invalid("grid spacing must be positive".into()));
        }
        if north_east.lat < south_west.lat || north_east.lon < south_west.lon || end < start {
            return Err(FieldError::Invalid("bounding box or time span is inverted".into()));
        }
        let count = |span: f64, step: f64| ((span / step - EDGE_SLACK).ceil().max(1.0) as usize) + 1;
        let axes = Self {
            lat0: south_west.lat,
            lon0: south_west.lon,
            dlat,
            dlon,
            nlat: count(north_east.lat - south_west.lat, dlat),
            nlon: count(north_east.lon - south_west.lon, dlon),
            t0: start,
            dt_minutes,
            nt: count(minutes_between(start, end), dt_minutes),
        };
        axes.validate()?;
        Ok(axes)
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(FieldError::Invalid(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("dlat", self.dlat)?;
        positive("dlon", self.dlon)?;
        positive("dt_minutes", self.dt_minutes)?;
        for (name, n) in [("nlat", self.nlat), ("nlon", self.nlon), ("nt", self.nt)] {
            if n < 2 {
                return Err(FieldError::Invalid(format!("{name} must be >= 2, got {n}")));
            }
        }
        if !LatLon::new(self.lat0, self.lon0).is_valid() || !self.node_pos(self.nlat - 1, self.nlon - 1).is_valid() {
            return Err(FieldError::Invalid("grid extends outside valid coordinates".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nt * self.nlat * self.nlon
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node_pos(&self, i: usize, j: usize) -> LatLon {
        LatLon::new(self.lat0 + i as f64 * self.dlat, self.lon0 + j as f64 * self.dlon)
    }

    pub fn slice_time(&self, k: usize) -> NaiveDateTime {
        self.t0 + Duration::milliseconds((k as f64 * self.dt_minutes * 60_000.0).round() as i64)
    }

    pub fn end_time(&self) -> NaiveDateTime {
        self.slice_time(self.nt - 1)
    }

    /// Flat index, t-major then lat then lon.
    pub fn index(&self, k: usize, i: usize, j: usize) -> usize {
        (k * self.nlat + i) * self.nlon + j
    }
}

/// Locates `x` on an axis of `n` nodes; returns the lower node and the
/// fractional offset in [0, 1].
const NODE_SNAP: f64 = 1e-10;

fn locate(x: f64, n: usize) -> Option<(usize, f64)> {
    let last = (n - 1) as f64;
    if !x.is_finite() || x < -EDGE_SLACK || x > last + EDGE_SLACK {
        return None;
    }
    // Node coordinates recomputed from lat0 + i*dlat can miss the integer by
    // a few ulps; snapping keeps node queries exact.
    let r = x.round();
    let x = if (x - r).abs() <= NODE_SNAP { r } else { x }.clamp(0.0, last);
    let i = (x.floor() as usize).min(n - 2);
    Some((i, x - i as f64))
}

/// Fractional slice index of `time`. Slice times are stored to the
/// millisecond, so a query at exactly `slice_time(k)` maps to `k`.
fn time_index(a: &GridAxes, time: NaiveDateTime) -> f64 {
    let x = minutes_between(a.t0, time) / a.dt_minutes;
    let r = x.round();
    if r >= 0.0 && r < a.nt as f64 && a.slice_time(r as usize) == time {
        r
    } else {
        x
    }
}

/// Dense field sampled on a regular grid. Values are ppm, laid out t-major,
/// then latitude, then longitude.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField<S> {
    pub axes: GridAxes,
    pub values: Vec<S>,
}

/// On-disk layout: axis fields and `values` side by side in one object.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile<S> {
    lat0: f64,
    lon0: f64,
    dlat: f64,
    dlon: f64,
    nlat: usize,
    nlon: usize,
    t0: NaiveDateTime,
    dt_minutes: f64,
    nt: usize,
    values: Vec<S>,
}

#[derive(Serialize)]
struct GridFileRef<'a, S> {
    lat0: f64,
    lon0: f64,
    dlat: f64,
    dlon: f64,
    nlat: usize,
    nlon: usize,
    t0: NaiveDateTime,
    dt_minutes: f64,
    nt: usize,
    values: &'a [S],
}

impl<S: Scalar> GridField<S> {
    pub fn new(axes: GridAxes, values: Vec<S>) -> Result<Self, FieldError> {
        let field = Self { axes, values };
        field.validate()?;
        Ok(field)
    }

    /// Builds a field by evaluating `f` at every node.
    pub fn from_fn(axes: GridAxes, mut f: impl FnMut(LatLon, NaiveDateTime) -> S) -> Result<Self, FieldError> {
        axes.validate()?;
        let mut values = Vec::with_capacity(axes.len());
        for k in 0..axes.nt {
            let t = axes.slice_time(k);
            for i in 0..axes.nlat {
                for j in 0..axes.nlon {
                    values.push(f(axes.node_pos(i, j), t));
                }
            }
        }
        Self::new(axes, values)
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        self.axes.validate()?;
        if self.values.len() != self.axes.len() {
            return Err(FieldError::Invalid(format!(
                "values has {} entries, expected nt*nlat*nlon = {}",
                self.values.len(),
                self.axes.len()
            )));
        }
        if let Some((idx, v)) = self.values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= S::zero())) {
            return Err(FieldError::Parse {
                location: format!("values[{idx}]"),
                message: format!("concentration must be finite and >= 0, got {v}"),
            });
        }
        Ok(())
    }

    pub fn value(&self, k: usize, i: usize, j: usize) -> S {
        self.values[self.axes.index(k, i, j)]
    }

    pub fn from_json(text: &str) -> Result<Self, FieldError> {
        let file: GridFile<S> = serde_json::from_str(text).map_err(|e| FieldError::Parse {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        let axes = GridAxes {
            lat0: file.lat0,
            lon0: file.lon0,
            dlat: file.dlat,
            dlon: file.dlon,
            nlat: file.nlat,
            nlon: file.nlon,
            t0: file.t0,
            dt_minutes: file.dt_minutes,
            nt: file.nt,
        };
        Self::new(axes, file.values)
    }

    pub fn to_json(&self) -> String {
        let a = &self.axes;
        let file = GridFileRef {
            lat0: a.lat0,
            lon0: a.lon0,
            dlat: a.dlat,
            dlon: a.dlon,
            nlat: a.nlat,
            nlon: a.nlon,
            t0: a.t0,
            dt_minutes: a.dt_minutes,
            nt: a.nt,
            values: &self.values,
        };
        serde_json::to_string(&file).expect("grid field serializes")
    }

    pub fn load(path: &Path) -> Result<Self, FieldError> {
        let text = std::fs::read_to_string(path).map_err(|e| FieldError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            FieldError::Parse { location, message } => {
                FieldError::Parse { location: format!("{}: {location}", path.display()), message }
            }
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), FieldError> {
        std::fs::write(path, self.to_json()).map_err(|e| FieldError::Io(format!("{}: {e}", path.display())))
    }

    fn bilinear(&self, k: usize, i: usize, j: usize, fy: S, fx: S) -> S {
        let one = S::one();
        let v00 = self.value(k, i, j);
        let v01 = self.value(k, i, j + 1);
        let v10 = self.value(k, i + 1, j);
        let v11 = self.value(k, i + 1, j + 1);
        (one - fy) * ((one - fx) * v00 + fx * v01) + fy * ((one - fx) * v10 + fx * v11)
    }
}

impl<S: Scalar> ConcentrationField<S> for GridField<S> {
    /// Bilinear in space, linear in time, over the 8 bracketing samples.
    fn concentration_at(&self, pos: LatLon, time: NaiveDateTime) -> Result<S, FieldError> {
        let a = &self.axes;
        let out = || FieldError::OutOfBounds { lat: pos.lat, lon: pos.lon, time };
        let (i, fy) = locate((pos.lat - a.lat0) / a.dlat, a.nlat).ok_or_else(out)?;
        let (j, fx) = locate((pos.lon - a.lon0) / a.dlon, a.nlon).ok_or_else(out)?;
        let (k, ft) = locate(time_index(a, time), a.nt).ok_or_else(out)?;
        let (fy, fx, ft) = (S::lit(fy), S::lit(fx), S::lit(ft));
        let before = self.bilinear(k, i, j, fy, fx);
        if ft == S::zero() {
            return Ok(before);
        }
        let after = self.bilinear(k + 1, i, j, fy, fx);
        Ok((S::one() - ft) * before + ft * after)
    }
}
