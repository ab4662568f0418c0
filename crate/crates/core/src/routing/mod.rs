//! Alternative commute routes and their per-minute expansion.
//!
//! A [`RouteProvider`] returns up to three alternatives for an
//! (origin, destination, mode, departure) query. Two providers ship: a
//! preloaded [`RouteCatalog`] and a [`GraphProvider`] computing loopless
//! k-shortest paths over a small road graph.

mod cache;
mod catalog;
mod graph;

use chrono::{NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::CachedProvider;
pub use catalog::{CatalogEntry, CatalogProvider, RouteCatalog, DEFAULT_BUCKET_MINUTES};
pub use graph::{GraphEdge, GraphNode, GraphProvider, RoadGraph, MAX_ALTERNATIVES};

use crate::activity::CommuteMode;
use crate::geo::{point_along, LatLon};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RoutingError {
    #[error("unknown place {0:?}")]
    UnknownPlace(String),
    #[error("no {mode} route from {origin:?} to {dest:?}")]
    NoRoute { origin: String, dest: String, mode: CommuteMode },
    #[error("origin and destination are both {0:?}")]
    SameEndpoints(String),
    #[error("mode {0} is not supported by this provider")]
    UnsupportedMode(CommuteMode),
    #[error("invalid route data: {0}")]
    Invalid(String),
    #[error("route file parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("route io error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteSegment {
    pub duration_s: u32,
    pub distance_m: f64,
    pub polyline: Vec<LatLon>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteProfile {
    pub route_id: String,
    pub mode: CommuteMode,
    pub segments: Vec<RouteSegment>,
    pub total_duration_s: u64,
}

impl RouteProfile {
    pub fn new(route_id: impl Into<String>, mode: CommuteMode, segments: Vec<RouteSegment>) -> Result<Self, RoutingError> {
        let total_duration_s = segments.iter().map(|s| u64::from(s.duration_s)).sum();
        let route = Self { route_id: route_id.into(), mode, segments, total_duration_s };
        route.validate()?;
        Ok(route)
    }

    pub fn validate(&self) -> Result<(), RoutingError> {
        let bad = |msg: String| Err(RoutingError::Invalid(format!("route {:?}: {msg}", self.route_id)));
        if self.route_id.is_empty() {
            return bad("empty route id".into());
        }
        if self.segments.is_empty() {
            return bad("no segments".into());
        }
        for (n, s) in self.segments.iter().enumerate() {
            if s.duration_s == 0 {
                return bad(format!("segment {n} has zero duration"));
            }
            if !(s.distance_m.is_finite() && s.distance_m >= 0.0) {
                return bad(format!("segment {n} has invalid distance {}", s.distance_m));
            }
            if s.polyline.len() < 2 || !s.polyline.iter().all(LatLon::is_valid) {
                return bad(format!("segment {n} polyline needs at least 2 valid points"));
            }
        }
        let sum: u64 = self.segments.iter().map(|s| u64::from(s.duration_s)).sum();
        if sum != self.total_duration_s {
            return bad(format!("total_duration_s {} != segment sum {sum}", self.total_duration_s));
        }
        Ok(())
    }

    pub fn distance_m(&self) -> f64 {
        self.segments.iter().map(|s| s.distance_m).sum()
    }

    /// Whole-minute samples along the route: `floor(total / 60) + 1`.
    pub fn sample_count(&self) -> usize {
        (self.total_duration_s / 60) as usize + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub minute_offset: u32,
    pub pos: LatLon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerMinutePath {
    pub samples: Vec<PathSample>,
}

impl PerMinutePath {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Position at each whole minute after departure. Within a segment the
/// traveller moves at constant speed along the polyline's arc length.
pub fn expand_per_minute(route: &RouteProfile) -> PerMinutePath {
    let mut samples = Vec::with_capacity(route.sample_count());
    let mut seg = 0usize;
    let mut seg_start = 0u64;
    for minute in 0..route.sample_count() as u32 {
        let tau = u64::from(minute) * 60;
        while seg + 1 < route.segments.len() && tau >= seg_start + u64::from(route.segments[seg].duration_s) {
            seg_start += u64::from(route.segments[seg].duration_s);
            seg += 1;
        }
        let s = &route.segments[seg];
        let f = ((tau - seg_start) as f64 / f64::from(s.duration_s)).min(1.0);
        samples.push(PathSample { minute_offset: minute, pos: point_along(&s.polyline, f) });
    }
    PerMinutePath { samples }
}

/// Source of alternative routes.
pub trait RouteProvider: Send + Sync {
    fn get_routes(
        &self,
        origin: &str,
        dest: &str,
        mode: CommuteMode,
        departure: NaiveDateTime,
    ) -> Result<Vec<RouteProfile>, RoutingError>;

    /// Departures mapping to the same key receive the same routes.
    fn departure_key(&self, departure: NaiveDateTime) -> i64 {
        departure_bucket(departure, DEFAULT_BUCKET_MINUTES)
    }
}

impl<P: RouteProvider + ?Sized> RouteProvider for std::sync::Arc<P> {
    fn get_routes(
        &self,
        origin: &str,
        dest: &str,
        mode: CommuteMode,
        departure: NaiveDateTime,
    ) -> Result<Vec<RouteProfile>, RoutingError> {
        (**self).get_routes(origin, dest, mode, departure)
    }

    fn departure_key(&self, departure: NaiveDateTime) -> i64 {
        (**self).departure_key(departure)
    }
}

/// Minute-of-day bucket index for a departure.
pub fn departure_bucket(departure: NaiveDateTime, bucket_minutes: u32) -> i64 {
    let minute_of_day = departure.num_seconds_from_midnight() / 60;
    i64::from(minute_of_day / bucket_minutes.max(1))
}

/// Checks the 1..=3 distinct-id contract on a provider answer.
pub(crate) fn check_alternatives(routes: &[RouteProfile]) -> Result<(), RoutingError> {
    if routes.is_empty() || routes.len() > MAX_ALTERNATIVES {
        return Err(RoutingError::Invalid(format!("expected 1-{MAX_ALTERNATIVES} routes, got {}", routes.len())));
    }
    for (i, r) in routes.iter().enumerate() {
        r.validate()?;
        if routes[..i].iter().any(|o| o.route_id == r.route_id) {
            return Err(RoutingError::Invalid(format!("duplicate route id {:?}", r.route_id)));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::haversine_m;
    use proptest::prelude::*;

    fn seg(duration_s: u32, a: LatLon, b: LatLon) -> RouteSegment {
        RouteSegment { duration_s, distance_m: haversine_m(a, b), polyline: vec![a, b] }
    }

    const A: LatLon = LatLon::new(-33.90, 151.20);
    const B: LatLon = LatLon::new(-33.90, 151.22);
    const C: LatLon = LatLon::new(-33.91, 151.22);

    #[test]
    fn uniform_motion_two_minutes() {
        let r = RouteProfile::new("r", CommuteMode::Walking, vec![seg(120, A, B)]).unwrap();
        let p = expand_per_minute(&r);
        assert_eq!(p.len(), 3);
        assert_eq!(p.samples[0].pos, A);
        assert!((p.samples[1].pos.lon - 151.21).abs() < 1e-6);
        assert!((p.samples[2].pos.lon - B.lon).abs() < 1e-12);
    }

    #[test]
    fn sub_minute_route_has_single_sample() {
        let r = RouteProfile::new("r", CommuteMode::Walking, vec![seg(59, A, B)]).unwrap();
        let p = expand_per_minute(&r);
        assert_eq!(p.samples, vec![PathSample { minute_offset: 0, pos: A }]);
    }

    #[test]
    fn piecewise_time_parameterization() {
        let r = RouteProfile::new("r", CommuteMode::Cycling, vec![seg(90, A, B), seg(30, B, C)]).unwrap();
        let p = expand_per_minute(&r);
        assert_eq!(p.len(), 3);
        let expected = point_along(&[A, B], 2.0 / 3.0);
        assert!((p.samples[1].pos.lon - expected.lon).abs() < 1e-12);
        assert!((p.samples[1].pos.lon - (151.20 + 0.02 * 2.0 / 3.0)).abs() < 1e-6);
        assert!((p.samples[2].pos.lat - C.lat).abs() < 1e-12);
    }

    #[test]
    fn validation_rejects_broken_routes() {
        assert!(RouteProfile::new("r", CommuteMode::Walking, vec![]).is_err());
        assert!(RouteProfile::new("r", CommuteMode::Walking, vec![seg(0, A, B)]).is_err());
        let mut r = RouteProfile::new("r", CommuteMode::Walking, vec![seg(60, A, B)]).unwrap();
        r.total_duration_s = 61;
        assert!(r.validate().is_err());
        let mut r = RouteProfile::new("r", CommuteMode::Walking, vec![seg(60, A, B)]).unwrap();
        r.segments[0].polyline.pop();
        assert!(r.validate().is_err());
    }

    fn arb_route() -> impl Strategy<Value = RouteProfile> {
        prop::collection::vec((1u32..2000, 0.0f64..0.02, 0.0f64..0.02, 2usize..5), 1..8).prop_map(|segs| {
            let mut cursor = A;
            let segments = segs
                .into_iter()
                .map(|(d, dlat, dlon, npts)| {
                    let end = LatLon::new(cursor.lat + dlat, cursor.lon + dlon);
                    let polyline: Vec<LatLon> = (0..npts).map(|k| cursor.lerp(end, k as f64 / (npts - 1) as f64)).collect();
                    let s = RouteSegment { duration_s: d, distance_m: haversine_m(cursor, end), polyline };
                    cursor = end;
                    s
                })
                .collect();
            RouteProfile::new("p", CommuteMode::Driving, segments).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]
        #[test]
        fn sample_count_law(route in arb_route()) {
            let p = expand_per_minute(&route);
            prop_assert_eq!(p.len() as u64, route.total_duration_s / 60 + 1);
            for (m, s) in p.samples.iter().enumerate() {
                prop_assert_eq!(s.minute_offset as usize, m);
            }
            prop_assert_eq!(p.samples[0].pos, route.segments[0].polyline[0]);
            let last = route.segments.last().unwrap();
            let lo_lat = last.polyline.iter().map(|q| q.lat).fold(f64::INFINITY, f64::min) - 1e-9;
            let hi_lat = last.polyline.iter().map(|q| q.lat).fold(f64::NEG_INFINITY, f64::max) + 1e-9;
            let end = p.samples.last().unwrap().pos;
            // Final sample lies on the final segment whenever the last minute falls inside it.
            let last_start = route.total_duration_s - u64::from(last.duration_s);
            if (p.len() as u64 - 1) * 60 >= last_start {
                prop_assert!(end.lat >= lo_lat && end.lat <= hi_lat);
            }
        }
    }
}
