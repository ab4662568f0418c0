//! Commute dose minimization over departure time, working hours and routes.
//!
//! The search space is the grid `{ω_min + k·t} × {β_min + k·t}` crossed with
//! every outbound/inbound route pair offered at the implied departure times.
//! `t = 1` is the exhaustive search; larger `t` is the coarse heuristic.

mod day;

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Instant;

use chrono::{Duration, NaiveDateTime};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use day::{full_day_dose, DayDose, DayTemplate};

use crate::activity::CommuteMode;
use crate::dose::{self, Conversion, DoseError, DoseModelParams, PersonProfile};
use crate::field::{ConcentrationField, FieldError};
use crate::routing::{expand_per_minute, PerMinutePath, RouteProfile, RouteProvider, RoutingError};
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MinimizerError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("no routes for departure {departure} (omega {omega}): {source}")]
    Routes { omega: NaiveDateTime, departure: NaiveDateTime, source: RoutingError },
    #[error("field lookup failed for omega {omega}, beta {beta_minutes} min: {source}")]
    Field { omega: NaiveDateTime, beta_minutes: u32, source: FieldError },
    #[error("route {route_id:?}: ventilation profile has {got} values, path has {expected} samples")]
    VentilationLength { route_id: String, expected: usize, got: usize },
    #[error("route {route_id:?}: {message}")]
    Ventilation { route_id: String, message: String },
    #[error(transparent)]
    Dose(#[from] DoseError),
    #[error("day reconstruction: {0}")]
    Day(String),
}

/// Per-minute ventilation along one route, aligned with its path samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
#[serde(transparent)]
pub struct VentilationProfile<S> {
    pub vr_l_min: Vec<S>,
}

impl<S: Scalar> VentilationProfile<S> {
    pub fn constant(vr: S, samples: usize) -> Self {
        Self { vr_l_min: vec![vr; samples] }
    }
}

/// How the per-route ventilation is obtained.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
#[serde(rename_all = "snake_case")]
pub enum VentilationSpec<S> {
    /// Constant, from the MET of the commute mode.
    #[default]
    Met,
    /// Constant, from a known energy expenditure (e.g. a trace average).
    EeKcalMin(S),
    /// Supplied per route id.
    Profiles(std::collections::BTreeMap<String, VentilationProfile<S>>),
}

#[derive(Clone)]
pub enum RouteSource {
    Fixed { outbound: RouteProfile, inbound: RouteProfile },
    Provider { provider: Arc<dyn RouteProvider>, home: String, work: String },
}

impl std::fmt::Debug for RouteSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RouteSource::Fixed { outbound, inbound } => {
                f.debug_struct("Fixed").field("outbound", &outbound.route_id).field("inbound", &inbound.route_id).finish()
            }
            RouteSource::Provider { home, work, .. } => f.debug_struct("Provider").field("home", home).field("work", work).finish(),
        }
    }
}

#[derive(Clone)]
pub struct Scenario<S: Scalar> {
    pub person: PersonProfile<S>,
    pub params: DoseModelParams<S>,
    pub field: Arc<dyn ConcentrationField<S>>,
    pub routes: RouteSource,
    pub mode: CommuteMode,
    pub omega_window: (NaiveDateTime, NaiveDateTime),
    /// Working hours in minutes, inclusive.
    pub beta_window: (u32, u32),
    pub granularity: u32,
    pub ventilation: VentilationSpec<S>,
}

impl<S: Scalar> Scenario<S> {
    pub fn validate(&self) -> Result<(), MinimizerError> {
        let bad = |m: String| Err(MinimizerError::InvalidScenario(m));
        if self.omega_window.0 > self.omega_window.1 {
            return bad(format!("omega_min {} is after omega_max {}", self.omega_window.0, self.omega_window.1));
        }
        if self.beta_window.0 > self.beta_window.1 {
            return bad(format!("beta_min {} exceeds beta_max {}", self.beta_window.0, self.beta_window.1));
        }
        if self.granularity == 0 {
            return bad("granularity must be >= 1 minute".into());
        }
        self.person.validate()?;
        self.params.validate()?;
        if let RouteSource::Fixed { outbound, inbound } = &self.routes {
            for r in [outbound, inbound] {
                r.validate().map_err(|e| MinimizerError::InvalidScenario(e.to_string()))?;
                if r.mode != self.mode {
                    return bad(format!("route {:?} is {} but the scenario mode is {}", r.route_id, r.mode, self.mode));
                }
            }
        }
        if let VentilationSpec::EeKcalMin(ee) = self.ventilation {
            if !(ee.is_finite() && ee >= S::zero()) {
                return bad(format!("ventilation EE must be finite and >= 0, got {ee}"));
            }
        }
        Ok(())
    }

    pub fn with_granularity(mut self, t: u32) -> Self {
        self.granularity = t;
        self
    }

    fn omega_grid(&self) -> Vec<NaiveDateTime> {
        let (lo, hi) = self.omega_window;
        let steps = grid_steps((hi - lo).num_minutes().max(0) as u64, self.granularity);
        (0..steps).map(|k| lo + Duration::minutes((k * u64::from(self.granularity)) as i64)).collect()
    }

    fn beta_grid(&self) -> Vec<u32> {
        let (lo, hi) = self.beta_window;
        let steps = grid_steps(u64::from(hi - lo), self.granularity);
        (0..steps).map(|k| lo + (k as u32) * self.granularity).collect()
    }
}

fn grid_steps(span_minutes: u64, t: u32) -> u64 {
    span_minutes / u64::from(t.max(1)) + 1
}

/// Number of schedule points `(⌊Δω/t⌋+1)(⌊Δβ/t⌋+1)`, before route pairs.
pub fn schedule_grid_size(omega_window: (NaiveDateTime, NaiveDateTime), beta_window: (u32, u32), t: u32) -> usize {
    let dw = (omega_window.1 - omega_window.0).num_minutes().max(0) as u64;
    let db = u64::from(beta_window.1.saturating_sub(beta_window.0));
    (grid_steps(dw, t) * grid_steps(db, t)) as usize
}

/// A route ready for evaluation: its per-minute path and ventilation.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedRoute<S> {
    pub profile: RouteProfile,
    pub path: PerMinutePath,
    pub vr: VentilationProfile<S>,
}

impl<S: Scalar> PreparedRoute<S> {
    pub fn new(profile: RouteProfile, vr: VentilationProfile<S>) -> Result<Self, MinimizerError> {
        let path = expand_per_minute(&profile);
        if vr.vr_l_min.len() != path.len() {
            return Err(MinimizerError::VentilationLength {
                route_id: profile.route_id,
                expected: path.len(),
                got: vr.vr_l_min.len(),
            });
        }
        if let Some(v) = vr.vr_l_min.iter().find(|v| !(v.is_finite() && **v >= S::zero())) {
            return Err(MinimizerError::Ventilation { route_id: profile.route_id, message: format!("invalid rate {v}") });
        }
        Ok(Self { profile, path, vr })
    }

    pub fn id(&self) -> &str {
        &self.profile.route_id
    }

    pub fn duration(&self) -> Duration {
        Duration::seconds(self.profile.total_duration_s as i64)
    }
}

/// Dose along one leg departing at `departure`: Σ c(l, departure + m)·vr[m].
pub fn leg_dose<S: Scalar, F: ConcentrationField<S> + ?Sized>(
    route: &PreparedRoute<S>,
    departure: NaiveDateTime,
    field: &F,
    conversion: &Conversion<S>,
) -> Result<S, LegError> {
    let mut sum = S::zero();
    for (sample, vr) in route.path.samples.iter().zip(&route.vr.vr_l_min) {
        let t = departure + Duration::minutes(i64::from(sample.minute_offset));
        let ppm = field.concentration_at(sample.pos, t).map_err(LegError::Field)?;
        sum = sum + dose::ppm_to_ug_per_liter(ppm, conversion).map_err(LegError::Dose)? * *vr;
    }
    Ok(sum)
}

#[derive(Debug, Clone, PartialEq)]
pub enum LegError {
    Field(FieldError),
    Dose(DoseError),
}

impl LegError {
    fn at(self, omega: NaiveDateTime, beta_minutes: u32) -> MinimizerError {
        match self {
            LegError::Field(source) => MinimizerError::Field { omega, beta_minutes, source },
            LegError::Dose(e) => MinimizerError::Dose(e),
        }
    }
}

/// Departure of the return leg: ω + h₁ + β, with h₁ in exact seconds.
pub fn return_departure<S>(omega: NaiveDateTime, r1: &PreparedRoute<S>, beta_minutes: u32) -> NaiveDateTime {
    omega + Duration::seconds(r1.profile.total_duration_s as i64) + Duration::minutes(i64::from(beta_minutes))
}

/// Commute dose for one candidate: outbound leg from ω plus return leg from
/// ω + h₁ + β.
pub fn commute_dose<S: Scalar, F: ConcentrationField<S> + ?Sized>(
    omega: NaiveDateTime,
    beta_minutes: u32,
    r1: &PreparedRoute<S>,
    r2: &PreparedRoute<S>,
    field: &F,
    conversion: &Conversion<S>,
) -> Result<S, MinimizerError> {
    let leg1 = leg_dose(r1, omega, field, conversion).map_err(|e| e.at(omega, beta_minutes))?;
    let leg2 = leg_dose(r2, return_departure(omega, r1, beta_minutes), field, conversion).map_err(|e| e.at(omega, beta_minutes))?;
    Ok(leg1 + leg2)
}

/// One row of the evaluation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
pub struct CandidateEvaluation<S> {
    pub omega: NaiveDateTime,
    pub beta_minutes: u32,
    pub route1_id: String,
    pub route2_id: String,
    pub dose_ug: S,
}

/// The winning schedule with its full route profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub omega: NaiveDateTime,
    pub beta_minutes: u32,
    pub route1: RouteProfile,
    pub route2: RouteProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
pub struct OptimizationResult<S> {
    pub min_dose_ug: S,
    pub argmin: Schedule,
    pub granularity: u32,
    pub evaluation_count: usize,
    pub table_t: Vec<CandidateEvaluation<S>>,
    pub wall_time_s: f64,
}

impl<S: Scalar> OptimizationResult<S> {
    /// Row of `table_t` matching the argmin.
    pub fn argmin_row(&self) -> Option<&CandidateEvaluation<S>> {
        self.table_t.iter().find(|r| {
            r.omega == self.argmin.omega
                && r.beta_minutes == self.argmin.beta_minutes
                && r.route1_id == self.argmin.route1.route_id
                && r.route2_id == self.argmin.route2.route_id
        })
    }
}

type Alternatives<S> = Arc<Vec<Arc<PreparedRoute<S>>>>;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Leg {
    Outbound,
    Inbound,
}

/// Run-local route cache keyed by the provider's departure bucket.
struct RouteResolver<'a, S: Scalar> {
    scenario: &'a Scenario<S>,
    constant_vr: Option<S>,
    fixed: Option<(Alternatives<S>, Alternatives<S>)>,
    cache: HashMap<(Leg, i64), Alternatives<S>>,
}

impl<'a, S: Scalar> RouteResolver<'a, S> {
    fn new(scenario: &'a Scenario<S>) -> Result<Self, MinimizerError> {
        let constant_vr = constant_ventilation(scenario)?;
        let mut resolver = Self { scenario, constant_vr, fixed: None, cache: HashMap::new() };
        if let RouteSource::Fixed { outbound, inbound } = &scenario.routes {
            let out = Arc::new(vec![Arc::new(resolver.prepare(outbound.clone())?)]);
            let back = Arc::new(vec![Arc::new(resolver.prepare(inbound.clone())?)]);
            resolver.fixed = Some((out, back));
        }
        Ok(resolver)
    }

    fn prepare(&self, profile: RouteProfile) -> Result<PreparedRoute<S>, MinimizerError> {
        prepare_with(&self.scenario.ventilation, self.constant_vr, profile)
    }

    fn get(&mut self, leg: Leg, omega: NaiveDateTime, departure: NaiveDateTime) -> Result<Alternatives<S>, MinimizerError> {
        if let Some((out, back)) = &self.fixed {
            return Ok(if leg == Leg::Outbound { out.clone() } else { back.clone() });
        }
        let RouteSource::Provider { provider, home, work } = &self.scenario.routes else { unreachable!() };
        let key = (leg, provider.departure_key(departure));
        if let Some(hit) = self.cache.get(&key) {
            return Ok(hit.clone());
        }
        let (from, to) = if leg == Leg::Outbound { (home, work) } else { (work, home) };
        let routes = provider
            .get_routes(from, to, self.scenario.mode, departure)
            .map_err(|source| MinimizerError::Routes { omega, departure, source })?;
        if routes.is_empty() {
            let source = RoutingError::NoRoute { origin: from.clone(), dest: to.clone(), mode: self.scenario.mode };
            return Err(MinimizerError::Routes { omega, departure, source });
        }
        let prepared = routes
            .into_iter()
            .map(|r| {
                if r.mode != self.scenario.mode {
                    return Err(MinimizerError::InvalidScenario(format!("provider returned a {} route for {}", r.mode, self.scenario.mode)));
                }
                self.prepare(r).map(Arc::new)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let prepared = Arc::new(prepared);
        self.cache.insert(key, prepared.clone());
        Ok(prepared)
    }
}

struct Task<S> {
    omega_idx: usize,
    beta: u32,
    r1: Arc<PreparedRoute<S>>,
    r1_idx: usize,
    r2: Arc<PreparedRoute<S>>,
}

struct Enumeration<S> {
    omegas: Vec<NaiveDateTime>,
    outbound: Vec<Alternatives<S>>,
    tasks: Vec<Task<S>>,
}

/// Enumerates the candidate rows in table order: ω, then β, then R1, then R2.
fn enumerate<S: Scalar>(scenario: &Scenario<S>) -> Result<Enumeration<S>, MinimizerError> {
    let mut resolver = RouteResolver::new(scenario)?;
    let omegas = scenario.omega_grid();
    let betas = scenario.beta_grid();
    let mut outbound = Vec::with_capacity(omegas.len());
    let mut tasks = Vec::new();
    for (omega_idx, &omega) in omegas.iter().enumerate() {
        let r1s = resolver.get(Leg::Outbound, omega, omega)?;
        for &beta in &betas {
            for (r1_idx, r1) in r1s.iter().enumerate() {
                let r2s = resolver.get(Leg::Inbound, omega, return_departure(omega, r1, beta))?;
                for r2 in r2s.iter() {
                    tasks.push(Task { omega_idx, beta, r1: r1.clone(), r1_idx, r2: r2.clone() });
                }
            }
        }
        outbound.push(r1s);
    }
    Ok(Enumeration { omegas, outbound, tasks })
}

/// Size of the evaluation table the scenario would produce: the schedule grid
/// crossed with the route pairs offered at each point.
pub fn evaluation_count<S: Scalar>(scenario: &Scenario<S>) -> Result<usize, MinimizerError> {
    scenario.validate()?;
    Ok(enumerate(scenario)?.tasks.len())
}

/// Optimizes with the scenario's own granularity.
pub fn optimize<S: Scalar>(scenario: &Scenario<S>, progress: Option<&AtomicUsize>) -> Result<OptimizationResult<S>, MinimizerError> {
    let started = Instant::now();
    scenario.validate()?;
    let Enumeration { omegas, outbound, tasks } = enumerate(scenario)?;
    let field = scenario.field.as_ref();
    let conv = &scenario.params.conversion;

    // Outbound legs depend only on (ω, R1).
    let leg1: Vec<Vec<Result<S, MinimizerError>>> = omegas
        .par_iter()
        .zip(outbound.par_iter())
        .map(|(&omega, r1s)| {
            r1s.iter().map(|r1| leg_dose(r1, omega, field, conv).map_err(|e| e.at(omega, scenario.beta_window.0))).collect()
        })
        .collect();

    let rows: Vec<Result<CandidateEvaluation<S>, MinimizerError>> = tasks
        .par_iter()
        .map(|task| {
            let omega = omegas[task.omega_idx];
            let first = leg1[task.omega_idx][task.r1_idx].clone()?;
            let second = leg_dose(&task.r2, return_departure(omega, &task.r1, task.beta), field, conv)
                .map_err(|e| e.at(omega, task.beta))?;
            if let Some(p) = progress {
                p.fetch_add(1, Ordering::Relaxed);
            }
            Ok(CandidateEvaluation {
                omega,
                beta_minutes: task.beta,
                route1_id: task.r1.id().to_owned(),
                route2_id: task.r2.id().to_owned(),
                dose_ug: first + second,
            })
        })
        .collect();
    let table_t = rows.into_iter().collect::<Result<Vec<_>, _>>()?;

    let best = (0..table_t.len())
        .min_by(|&a, &b| candidate_order(&table_t[a], &table_t[b]))
        .expect("schedule grid is never empty");
    let task = &tasks[best];
    let row = &table_t[best];
    Ok(OptimizationResult {
        min_dose_ug: row.dose_ug,
        argmin: Schedule {
            omega: row.omega,
            beta_minutes: row.beta_minutes,
            route1: task.r1.profile.clone(),
            route2: task.r2.profile.clone(),
        },
        granularity: scenario.granularity,
        evaluation_count: table_t.len(),
        table_t,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

/// Total order used to pick the minimum: dose, then ω, β, route ids.
pub fn candidate_order<S: Scalar>(a: &CandidateEvaluation<S>, b: &CandidateEvaluation<S>) -> std::cmp::Ordering {
    a.dose_ug
        .partial_cmp(&b.dose_ug)
        .expect("finite doses")
        .then(a.omega.cmp(&b.omega))
        .then(a.beta_minutes.cmp(&b.beta_minutes))
        .then_with(|| a.route1_id.cmp(&b.route1_id))
        .then_with(|| a.route2_id.cmp(&b.route2_id))
}

/// Exhaustive one-minute search.
pub fn brute_force<S: Scalar>(scenario: &Scenario<S>) -> Result<OptimizationResult<S>, MinimizerError> {
    optimize(&scenario.clone().with_granularity(1), None)
}

/// Coarse search with step `t` minutes on both ω and β.
pub fn heuristic<S: Scalar>(scenario: &Scenario<S>, t: u32) -> Result<OptimizationResult<S>, MinimizerError> {
    optimize(&scenario.clone().with_granularity(t), None)
}

fn constant_ventilation<S: Scalar>(scenario: &Scenario<S>) -> Result<Option<S>, MinimizerError> {
    Ok(match &scenario.ventilation {
        VentilationSpec::Met => Some(dose::ventilation_for_activity(&scenario.person, &scenario.params, scenario.mode.activity())?),
        VentilationSpec::EeKcalMin(ee) => Some(dose::ventilation_for_ee(&scenario.person, &scenario.params, *ee)?),
        VentilationSpec::Profiles(_) => None,
    })
}

fn prepare_with<S: Scalar>(
    spec: &VentilationSpec<S>,
    constant_vr: Option<S>,
    profile: RouteProfile,
) -> Result<PreparedRoute<S>, MinimizerError> {
    let vr = match (spec, constant_vr) {
        (_, Some(v)) => VentilationProfile::constant(v, profile.sample_count()),
        (VentilationSpec::Profiles(map), None) => map.get(&profile.route_id).cloned().ok_or_else(|| MinimizerError::Ventilation {
            route_id: profile.route_id.clone(),
            message: "no ventilation profile supplied".into(),
        })?,
        _ => unreachable!("constant ventilation exists for non-profile specs"),
    };
    PreparedRoute::new(profile, vr)
}

/// Prepares a route with the scenario's ventilation rule.
pub fn prepare_route<S: Scalar>(scenario: &Scenario<S>, profile: RouteProfile) -> Result<PreparedRoute<S>, MinimizerError> {
    prepare_with(&scenario.ventilation, constant_ventilation(scenario)?, profile)
}

/// Dose of one specific schedule under the scenario's rules.
pub fn schedule_dose<S: Scalar>(scenario: &Scenario<S>, schedule: &Schedule) -> Result<S, MinimizerError> {
    let r1 = prepare_route(scenario, schedule.route1.clone())?;
    let r2 = prepare_route(scenario, schedule.route2.clone())?;
    commute_dose(schedule.omega, schedule.beta_minutes, &r1, &r2, scenario.field.as_ref(), &scenario.params.conversion)
}
