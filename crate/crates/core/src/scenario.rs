//! Scenario documents: a JSON file naming every optimization input, with
//! assets (params, field, routes) referenced by path.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{Duration, NaiveDateTime, NaiveTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activity::CommuteMode;
use crate::dose::{DoseModelParams, PersonProfile};
use crate::field::{ConcentrationField, GridField, SyntheticField, SyntheticFieldSpec, UniformField};
use crate::minimizer::{return_departure, prepare_route, DayTemplate, RouteSource, Scenario, Schedule, VentilationSpec};
use crate::routing::{CachedProvider, CatalogProvider, GraphProvider, RoadGraph, RouteCatalog, RouteProfile, RouteProvider};
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("scenario parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("asset {name:?}: {message}")]
    MissingAsset { name: String, message: String },
    #[error("asset {name:?} is invalid: {message}")]
    BadAsset { name: String, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    /// Schedule only, routes pinned to the baseline pair.
    Fixed,
    /// Schedule and routes jointly.
    #[default]
    Joint,
}

impl std::str::FromStr for SearchMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fixed" => Ok(SearchMode::Fixed),
            "joint" => Ok(SearchMode::Joint),
            other => Err(format!("unknown search mode {other:?} (expected fixed or joint)")),
        }
    }
}

impl std::fmt::Display for SearchMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SearchMode::Fixed => "fixed",
            SearchMode::Joint => "joint",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldRef<S> {
    Grid(String),
    Synthetic(String),
    Uniform(S),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RoutesRef {
    Fixed { outbound: String, inbound: String },
    Catalog { path: String, home: String, work: String },
    Graph { path: String, home: String, work: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineDoc {
    pub omega: NaiveDateTime,
    pub beta_minutes: u32,
    /// Defaults to the first route offered.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route1: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route2: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc<S> {
    pub person: PersonProfile<S>,
    /// Dose parameter file; the bundled fixture when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<String>,
    pub field: FieldRef<S>,
    pub routes: RoutesRef,
    pub mode: CommuteMode,
    pub omega_window: [NaiveDateTime; 2],
    pub beta_window_minutes: [u32; 2],
    #[serde(default = "default_granularity")]
    pub granularity_minutes: u32,
    #[serde(default)]
    pub search: SearchMode,
    #[serde(default)]
    pub ventilation: VentilationSpec<S>,
    pub baseline: BaselineDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub day: Option<DayTemplate<S>>,
}

fn default_granularity() -> u32 {
    1
}

impl<S: Scalar> ScenarioDoc<S> {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

/// Maps an asset reference to a readable path.
pub trait AssetResolver {
    fn resolve(&self, name: &str) -> Result<PathBuf, ScenarioError>;
}

/// Resolves relative references against a base directory (the scenario
/// file's own directory for the CLI).
#[derive(Debug, Clone)]
pub struct RelativeTo(pub PathBuf);

impl AssetResolver for RelativeTo {
    fn resolve(&self, name: &str) -> Result<PathBuf, ScenarioError> {
        let p = Path::new(name);
        let full = if p.is_absolute() { p.to_path_buf() } else { self.0.join(p) };
        if full.is_file() {
            Ok(full)
        } else {
            Err(ScenarioError::MissingAsset { name: name.into(), message: format!("{} not found", full.display()) })
        }
    }
}

/// A scenario with every asset loaded and the baseline resolved.
#[derive(Clone)]
pub struct LoadedScenario<S: Scalar> {
    /// Scenario as written (joint when routes come from a provider).
    pub scenario: Scenario<S>,
    pub search: SearchMode,
    pub baseline: Schedule,
    pub day: DayTemplate<S>,
}

impl<S: Scalar> LoadedScenario<S> {
    /// The scenario restricted according to `search`.
    pub fn for_search(&self, search: SearchMode) -> Scenario<S> {
        match search {
            SearchMode::Joint => self.scenario.clone(),
            SearchMode::Fixed => Scenario {
                routes: RouteSource::Fixed {
                    outbound: self.baseline.route1.clone(),
                    inbound: self.baseline.route2.clone(),
                },
                ..self.scenario.clone()
            },
        }
    }
}

fn read(resolver: &dyn AssetResolver, name: &str) -> Result<(PathBuf, String), ScenarioError> {
    let path = resolver.resolve(name)?;
    let text = std::fs::read_to_string(&path)
        .map_err(|e| ScenarioError::MissingAsset { name: name.into(), message: e.to_string() })?;
    Ok((path, text))
}

fn bad_asset(name: &str) -> impl Fn(String) -> ScenarioError + '_ {
    move |message| ScenarioError::BadAsset { name: name.into(), message }
}

pub fn load_field<S: Scalar>(
    field: &FieldRef<S>,
    resolver: &dyn AssetResolver,
) -> Result<Arc<dyn ConcentrationField<S>>, ScenarioError> {
    Ok(match field {
        FieldRef::Grid(name) => {
            let (_, text) = read(resolver, name)?;
            Arc::new(GridField::<S>::from_json(&text).map_err(|e| bad_asset(name)(e.to_string()))?)
        }
        FieldRef::Synthetic(name) => {
            let (_, text) = read(resolver, name)?;
            let spec = SyntheticFieldSpec::<S>::from_json(&text).map_err(|e| bad_asset(name)(e.to_string()))?;
            Arc::new(SyntheticField::new(spec).map_err(|e| bad_asset(name)(e.to_string()))?)
        }
        FieldRef::Uniform(v) => {
            if !(v.is_finite() && *v >= S::zero()) {
                return Err(ScenarioError::Invalid(format!("uniform field value must be >= 0, got {v}")));
            }
            Arc::new(UniformField(*v))
        }
    })
}

fn load_routes(routes: &RoutesRef, resolver: &dyn AssetResolver) -> Result<RouteSource, ScenarioError> {
    let route_file = |name: &str| -> Result<RouteProfile, ScenarioError> {
        let (_, text) = read(resolver, name)?;
        let r: RouteProfile = serde_json::from_str(&text).map_err(|e| bad_asset(name)(e.to_string()))?;
        r.validate().map_err(|e| bad_asset(name)(e.to_string()))?;
        Ok(r)
    };
    Ok(match routes {
        RoutesRef::Fixed { outbound, inbound } => RouteSource::Fixed { outbound: route_file(outbound)?, inbound: route_file(inbound)? },
        RoutesRef::Catalog { path, home, work } => {
            let (_, text) = read(resolver, path)?;
            let catalog = RouteCatalog::from_json(&text).map_err(|e| bad_asset(path)(e.to_string()))?;
            let provider = CatalogProvider::new(catalog).map_err(|e| bad_asset(path)(e.to_string()))?;
            RouteSource::Provider { provider: Arc::new(CachedProvider::new(provider)), home: home.clone(), work: work.clone() }
        }
        RoutesRef::Graph { path, home, work } => {
            let (_, text) = read(resolver, path)?;
            let graph = RoadGraph::from_json(&text).map_err(|e| bad_asset(path)(e.to_string()))?;
            let provider = GraphProvider::new(graph).map_err(|e| bad_asset(path)(e.to_string()))?;
            RouteSource::Provider { provider: Arc::new(CachedProvider::new(provider)), home: home.clone(), work: work.clone() }
        }
    })
}

fn pick(
    provider: &dyn RouteProvider,
    from: &str,
    to: &str,
    mode: CommuteMode,
    departure: NaiveDateTime,
    wanted: Option<&str>,
) -> Result<RouteProfile, ScenarioError> {
    let routes = provider
        .get_routes(from, to, mode, departure)
        .map_err(|e| ScenarioError::Invalid(format!("baseline routes {from} -> {to} at {departure}: {e}")))?;
    match wanted {
        None => routes.into_iter().next().ok_or_else(|| ScenarioError::Invalid(format!("no baseline route {from} -> {to}"))),
        Some(id) => routes
            .into_iter()
            .find(|r| r.route_id == id)
            .ok_or_else(|| ScenarioError::Invalid(format!("baseline route {id:?} is not offered {from} -> {to} at {departure}"))),
    }
}

/// Default accounted day: 08:00 (or ω_min if earlier) up to midnight.
fn default_day<S>(omega_min: NaiveDateTime) -> DayTemplate<S> {
    let eight = omega_min.date().and_time(NaiveTime::from_hms_opt(8, 0, 0).expect("valid time"));
    DayTemplate {
        start: eight.min(omega_min),
        end: omega_min.date().and_time(NaiveTime::MIN) + Duration::days(1),
        home_ee_kcal_min: None,
        work_ee_kcal_min: None,
    }
}

pub fn load_scenario<S: Scalar>(doc: &ScenarioDoc<S>, resolver: &dyn AssetResolver) -> Result<LoadedScenario<S>, ScenarioError> {
    let params = match &doc.params {
        Some(name) => {
            let (_, text) = read(resolver, name)?;
            DoseModelParams::<S>::from_json(&text).map_err(|e| bad_asset(name)(e.to_string()))?
        }
        None => DoseModelParams::fixture(),
    };
    let scenario = Scenario {
        person: doc.person.clone(),
        params,
        field: load_field(&doc.field, resolver)?,
        routes: load_routes(&doc.routes, resolver)?,
        mode: doc.mode,
        omega_window: (doc.omega_window[0], doc.omega_window[1]),
        beta_window: (doc.beta_window_minutes[0], doc.beta_window_minutes[1]),
        granularity: doc.granularity_minutes,
        ventilation: doc.ventilation.clone(),
    };
    scenario.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;

    let b = &doc.baseline;
    let baseline = match &scenario.routes {
        RouteSource::Fixed { outbound, inbound } => {
            for (wanted, r) in [(&b.route1, outbound), (&b.route2, inbound)] {
                if wanted.as_ref().is_some_and(|id| *id != r.route_id) {
                    return Err(ScenarioError::Invalid(format!("baseline route {wanted:?} differs from fixed route {:?}", r.route_id)));
                }
            }
            Schedule { omega: b.omega, beta_minutes: b.beta_minutes, route1: outbound.clone(), route2: inbound.clone() }
        }
        RouteSource::Provider { provider, home, work } => {
            let route1 = pick(provider.as_ref(), home, work, scenario.mode, b.omega, b.route1.as_deref())?;
            let r1 = prepare_route(&scenario, route1.clone()).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
            let back = return_departure(b.omega, &r1, b.beta_minutes);
            let route2 = pick(provider.as_ref(), work, home, scenario.mode, back, b.route2.as_deref())?;
            Schedule { omega: b.omega, beta_minutes: b.beta_minutes, route1, route2 }
        }
    };
    let day = doc.day.clone().unwrap_or_else(|| default_day(scenario.omega_window.0));
    Ok(LoadedScenario { scenario, search: doc.search, baseline, day })
}

/// Reads and loads a scenario file, resolving assets next to it.
pub fn load_scenario_file<S: Scalar>(path: &Path) -> Result<LoadedScenario<S>, ScenarioError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ScenarioError::MissingAsset { name: path.display().to_string(), message: e.to_string() })?;
    let doc = ScenarioDoc::<S>::from_json(&text)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    load_scenario(&doc, &RelativeTo(base))
}

/// Loads a field file, telling a grid (has `values`) from a synthetic spec
/// (has `base_ppm`).
pub fn load_field_path<S: Scalar>(path: &Path) -> Result<Arc<dyn ConcentrationField<S>>, ScenarioError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::MissingAsset { name: name.clone(), message: e.to_string() })?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad_asset(&name)(e.to_string()))?;
    let field: Arc<dyn ConcentrationField<S>> = if value.get("values").is_some() {
        Arc::new(GridField::<S>::from_json(&text).map_err(|e| bad_asset(&name)(e.to_string()))?)
    } else if value.get("base_ppm").is_some() {
        let spec = SyntheticFieldSpec::<S>::from_json(&text).map_err(|e| bad_asset(&name)(e.to_string()))?;
        Arc::new(SyntheticField::new(spec).map_err(|e| bad_asset(&name)(e.to_string()))?)
    } else {
        return Err(bad_asset(&name)("neither a grid (values) nor a synthetic spec (base_ppm)".into()));
    };
    Ok(field)
}
