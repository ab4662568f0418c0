use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use super::{check_alternatives, departure_bucket, RouteProfile, RouteProvider, RoutingError};
use crate::activity::CommuteMode;

pub const DEFAULT_BUCKET_MINUTES: u32 = 15;

fn default_bucket_minutes() -> u32 {
    DEFAULT_BUCKET_MINUTES
}

/// Routes for one (origin, destination, mode, departure bucket). A missing
/// `bucket` applies to every departure time without a dedicated entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogEntry {
    pub origin: String,
    pub dest: String,
    pub mode: CommuteMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bucket: Option<i64>,
    pub routes: Vec<RouteProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteCatalog {
    #[serde(default = "default_bucket_minutes")]
    pub bucket_minutes: u32,
    pub entries: Vec<CatalogEntry>,
}

impl RouteCatalog {
    pub fn validate(&self) -> Result<(), RoutingError> {
        if self.bucket_minutes == 0 || self.bucket_minutes > 24 * 60 {
            return Err(RoutingError::Invalid(format!("bucket_minutes {} out of range", self.bucket_minutes)));
        }
        let mut keys = BTreeSet::new();
        for e in &self.entries {
            if e.origin == e.dest {
                return Err(RoutingError::SameEndpoints(e.origin.clone()));
            }
            for r in &e.routes {
                if r.mode != e.mode {
                    return Err(RoutingError::Invalid(format!(
                        "route {:?} has mode {} in a {} entry",
                        r.route_id, r.mode, e.mode
                    )));
                }
            }
            check_alternatives(&e.routes)?;
            if !keys.insert((e.origin.clone(), e.dest.clone(), e.mode, e.bucket)) {
                return Err(RoutingError::Invalid(format!(
                    "duplicate catalog entry {} -> {} ({}, bucket {:?})",
                    e.origin, e.dest, e.mode, e.bucket
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, RoutingError> {
        let catalog: Self = serde_json::from_str(text).map_err(|e| RoutingError::Parse {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        catalog.validate()?;
        Ok(catalog)
    }

    pub fn load(path: &Path) -> Result<Self, RoutingError> {
        let text = std::fs::read_to_string(path).map_err(|e| RoutingError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("catalog serializes")
    }
}

type EntryKey = (String, String, CommuteMode, Option<i64>);

/// Serves routes from a preloaded, immutable catalog.
#[derive(Debug, Clone)]
pub struct CatalogProvider {
    bucket_minutes: u32,
    places: BTreeSet<String>,
    entries: HashMap<EntryKey, Vec<RouteProfile>>,
}

impl CatalogProvider {
    pub fn new(catalog: RouteCatalog) -> Result<Self, RoutingError> {
        catalog.validate()?;
        let mut places = BTreeSet::new();
        let mut entries = HashMap::new();
        for e in catalog.entries {
            places.insert(e.origin.clone());
            places.insert(e.dest.clone());
            entries.insert((e.origin, e.dest, e.mode, e.bucket), e.routes);
        }
        Ok(Self { bucket_minutes: catalog.bucket_minutes, places, entries })
    }

    pub fn bucket_minutes(&self) -> u32 {
        self.bucket_minutes
    }
}

impl RouteProvider for CatalogProvider {
    fn get_routes(
        &self,
        origin: &str,
        dest: &str,
        mode: CommuteMode,
        departure: NaiveDateTime,
    ) -> Result<Vec<RouteProfile>, RoutingError> {
        if origin == dest {
            return Err(RoutingError::SameEndpoints(origin.to_string()));
        }
        for place in [origin, dest] {
            if !self.places.contains(place) {
                return Err(RoutingError::UnknownPlace(place.to_string()));
            }
        }
        let bucket = departure_bucket(departure, self.bucket_minutes);
        let key = |b| (origin.to_string(), dest.to_string(), mode, b);
        self.entries
            .get(&key(Some(bucket)))
            .or_else(|| self.entries.get(&key(None)))
            .cloned()
            .ok_or_else(|| RoutingError::NoRoute { origin: origin.into(), dest: dest.into(), mode })
    }

    fn departure_key(&self, departure: NaiveDateTime) -> i64 {
        departure_bucket(departure, self.bucket_minutes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::LatLon;
    use crate::routing::RouteSegment;
    use chrono::NaiveDate;

    fn route(id: &str, minutes: u32) -> RouteProfile {
        let seg = RouteSegment {
            duration_s: minutes * 60,
            distance_m: 1000.0,
            polyline: vec![LatLon::new(-33.9, 151.2), LatLon::new(-33.91, 151.21)],
        };
        RouteProfile::new(id, CommuteMode::Driving, vec![seg]).unwrap()
    }

    fn catalog() -> RouteCatalog {
        RouteCatalog {
            bucket_minutes: 15,
            entries: vec![
                CatalogEntry {
                    origin: "home".into(),
                    dest: "work".into(),
                    mode: CommuteMode::Driving,
                    bucket: None,
                    routes: vec![route("m1", 30), route("side", 40)],
                },
                CatalogEntry {
                    origin: "home".into(),
                    dest: "work".into(),
                    mode: CommuteMode::Driving,
                    bucket: Some(34),
                    routes: vec![route("jam", 50)],
                },
            ],
        }
    }

    fn at(h: u32, m: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2016, 9, 12).unwrap().and_hms_opt(h, m, 0).unwrap()
    }

    #[test]
    fn cache_hits_are_idempotent() {
        let p = CatalogProvider::new(catalog()).unwrap();
        let a = p.get_routes("home", "work", CommuteMode::Driving, at(8, 0)).unwrap();
        let b = p.get_routes("home", "work", CommuteMode::Driving, at(8, 0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
    }

    #[test]
    fn bucket_specific_entry_wins() {
        let p = CatalogProvider::new(catalog()).unwrap();
        let r = p.get_routes("home", "work", CommuteMode::Driving, at(8, 35)).unwrap();
        assert_eq!(r[0].route_id, "jam");
        assert_eq!(p.departure_key(at(8, 35)), 34);
    }

    #[test]
    fn lookup_errors() {
        let p = CatalogProvider::new(catalog()).unwrap();
        assert_eq!(
            p.get_routes("home", "gym", CommuteMode::Driving, at(8, 0)),
            Err(RoutingError::UnknownPlace("gym".into()))
        );
        assert!(matches!(
            p.get_routes("work", "home", CommuteMode::Driving, at(8, 0)),
            Err(RoutingError::NoRoute { .. })
        ));
        assert!(matches!(p.get_routes("home", "home", CommuteMode::Driving, at(8, 0)), Err(RoutingError::SameEndpoints(_))));
    }

    #[test]
    fn validation_rejects_bad_catalogs() {
        let mut c = catalog();
        c.entries[0].routes.push(route("m1", 31));
        assert!(c.validate().is_err(), "duplicate ids");
        let mut c = catalog();
        c.entries[0].routes.extend([route("a", 1), route("b", 2)]);
        assert!(c.validate().is_err(), "more than three routes");
        let mut c = catalog();
        c.entries[1].bucket = None;
        assert!(c.validate().is_err(), "duplicate key");
    }

    #[test]
    fn json_round_trip() {
        let c = catalog();
        assert_eq!(RouteCatalog::from_json(&c.to_json()).unwrap(), c);
    }
}
