//! Geographic helpers on WGS84 latitude/longitude pairs.

use serde::{Deserialize, Serialize};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub const fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
    }

    /// Linear interpolation in coordinate space; `f` in [0, 1].
    pub fn lerp(self, other: LatLon, f: f64) -> LatLon {
        LatLon {
            lat: self.lat + (other.lat - self.lat) * f,
            lon: self.lon + (other.lon - self.lon) * f,
        }
    }
}

/// Great-circle distance in meters.
pub fn haversine_m(a: LatLon, b: LatLon) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Length of a polyline in meters.
pub fn polyline_length_m(points: &[LatLon]) -> f64 {
    points.windows(2).map(|w| haversine_m(w[0], w[1])).sum()
}

/// Point at fraction `f` of a polyline's arc length.
pub fn point_along(points: &[LatLon], f: f64) -> LatLon {
    match points {
        [] => panic!("point_along on empty polyline"),
        [only] => *only,
        _ => {
            let f = f.clamp(0.0, 1.0);
            let lengths: Vec<f64> = points.windows(2).map(|w| haversine_m(w[0], w[1])).collect();
            let total: f64 = lengths.iter().sum();
            if total <= 0.0 {
                // Degenerate polyline: split by vertex count.
                let pos = f * (points.len() - 1) as f64;
                let i = (pos.floor() as usize).min(points.len() - 2);
                return points[i].lerp(points[i + 1], pos - i as f64);
            }
            let target = f * total;
            let mut acc = 0.0;
            for (i, len) in lengths.iter().enumerate() {
                if acc + len >= target || i == lengths.len() - 1 {
                    let local = if *len > 0.0 { ((target - acc) / len).clamp(0.0, 1.0) } else { 0.0 };
                    return points[i].lerp(points[i + 1], local);
                }
                acc += len;
            }
            *points.last().unwrap()
        }
    }
}

/// Shortest distance in meters from `p` to a polyline, using a local
/// equirectangular projection around `p`. Accurate for city-scale extents.
pub fn distance_to_polyline_m(p: LatLon, points: &[LatLon]) -> f64 {
    let kx = EARTH_RADIUS_M * p.lat.to_radians().cos() * std::f64::consts::PI / 180.0;
    let ky = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
    let project = |q: LatLon| ((q.lon - p.lon) * kx, (q.lat - p.lat) * ky);
    match points {
        [] => f64::INFINITY,
        [only] => haversine_m(p, *only),
        _ => points
            .windows(2)
            .map(|w| {
                let (ax, ay) = project(w[0]);
                let (bx, by) = project(w[1]);
                let (dx, dy) = (bx - ax, by - ay);
                let len2 = dx * dx + dy * dy;
                let t = if len2 > 0.0 { (-(ax * dx + ay * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
                let (cx, cy) = (ax + t * dx, ay + t * dy);
                (cx * cx + cy * cy).sqrt()
            })
            .fold(f64::INFINITY, f64::min),
    }
}
