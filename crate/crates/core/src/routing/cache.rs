use std::collections::HashMap;
use std::sync::Mutex;

use chrono::NaiveDateTime;

use super::{check_alternatives, RouteProfile, RouteProvider, RoutingError};
use crate::activity::CommuteMode;

type Key = (String, String, CommuteMode, i64);

/// Memoizes an inner provider per (origin, destination, mode, departure key).
/// Only successful answers are stored.
pub struct CachedProvider<P> {
    inner: P,
    cache: Mutex<HashMap<Key, Vec<RouteProfile>>>,
}

impl<P: RouteProvider> CachedProvider<P> {
    pub fn new(inner: P) -> Self {
        Self { inner, cache: Mutex::new(HashMap::new()) }
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }

    pub fn len(&self) -> usize {
        self.cache.lock().expect("route cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<P: RouteProvider> RouteProvider for CachedProvider<P> {
    fn get_routes(
        &self,
        origin: &str,
        dest: &str,
        mode: CommuteMode,
        departure: NaiveDateTime,
    ) -> Result<Vec<RouteProfile>, RoutingError> {
        let key = (origin.to_string(), dest.to_string(), mode, self.inner.departure_key(departure));
        if let Some(hit) = self.cache.lock().expect("route cache poisoned").get(&key) {
            return Ok(hit.clone());
        }
        let routes = self.inner.get_routes(origin, dest, mode, departure)?;
        check_alternatives(&routes)?;
        self.cache.lock().expect("route cache poisoned").entry(key).or_insert_with(|| routes.clone());
        Ok(routes)
    }

    fn departure_key(&self, departure: NaiveDateTime) -> i64 {
        self.inner.departure_key(departure)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::LatLon;
    use crate::routing::RouteSegment;
    use chrono::NaiveDate;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Counting(AtomicUsize);

    impl RouteProvider for Counting {
        fn get_routes(&self, _: &str, _: &str, mode: CommuteMode, _: NaiveDateTime) -> Result<Vec<RouteProfile>, RoutingError> {
            self.0.fetch_add(1, Ordering::SeqCst);
            let seg = RouteSegment {
                duration_s: 600,
                distance_m: 10.0,
                polyline: vec![LatLon::new(0.0, 0.0), LatLon::new(0.0, 0.001)],
            };
            Ok(vec![RouteProfile::new("only", mode, vec![seg]).unwrap()])
        }
    }

    #[test]
    fn repeated_queries_in_a_bucket_hit_the_cache() {
        let p = CachedProvider::new(Counting(AtomicUsize::new(0)));
        let d = NaiveDate::from_ymd_opt(2016, 9, 12).unwrap();
        for m in [0, 5, 14] {
            p.get_routes("h", "w", CommuteMode::Walking, d.and_hms_opt(8, m, 0).unwrap()).unwrap();
        }
        assert_eq!(p.inner().0.load(Ordering::SeqCst), 1);
        p.get_routes("h", "w", CommuteMode::Walking, d.and_hms_opt(8, 15, 0).unwrap()).unwrap();
        assert_eq!(p.inner().0.load(Ordering::SeqCst), 2);
        assert_eq!(p.len(), 2);
    }
}
