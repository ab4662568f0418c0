//! Output documents shared by the CLI and the service, so both interfaces
//! emit the same bytes for the same inputs.

use std::sync::atomic::AtomicUsize;

use serde::{Deserialize, Serialize};

use crate::activity::CommuteMode;
use crate::minimizer::{full_day_dose, optimize, CandidateEvaluation, DayDose, MinimizerError, OptimizationResult, Schedule};
use crate::scenario::{LoadedScenario, SearchMode};
use crate::trace::{classify_location, reduction_percent, Category, DosePoint, ExposureProfile, ProfileOptions, Trace};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
pub struct SummaryRow<S> {
    pub mode: CommuteMode,
    pub search: SearchMode,
    pub granularity: u32,
    pub original_daily_ug: S,
    pub minimized_daily_ug: S,
    pub reduction_percent: S,
    pub evaluation_count: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
pub struct OptimizationReport<S> {
    pub summary: SummaryRow<S>,
    pub baseline: Schedule,
    pub original: DayDose<S>,
    pub minimized: DayDose<S>,
    pub result: OptimizationResult<S>,
}

impl<S: Scalar> OptimizationReport<S> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Copy with the wall-clock fields zeroed, for equality checks.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        r.summary.wall_time_s = 0.0;
        r.result.wall_time_s = 0.0;
        r
    }
}

/// Optimizes `loaded` and reconstructs the original and minimized days.
pub fn run_optimization<S: Scalar>(
    loaded: &LoadedScenario<S>,
    search: SearchMode,
    granularity: u32,
    progress: Option<&AtomicUsize>,
) -> Result<OptimizationReport<S>, MinimizerError> {
    let scenario = loaded.for_search(search).with_granularity(granularity);
    let result = optimize(&scenario, progress)?;
    let original = full_day_dose(&loaded.day, &scenario, &loaded.baseline)?;
    let minimized = full_day_dose(&loaded.day, &scenario, &result.argmin)?;
    let reduction = reduction_percent(original.total_ug, minimized.total_ug).map_err(|e| MinimizerError::Day(e.to_string()))?;
    let summary = SummaryRow {
        mode: scenario.mode,
        search,
        granularity,
        original_daily_ug: original.total_ug,
        minimized_daily_ug: minimized.total_ug,
        reduction_percent: reduction,
        evaluation_count: result.evaluation_count,
        wall_time_s: result.wall_time_s,
    };
    Ok(OptimizationReport { summary, baseline: loaded.baseline.clone(), original, minimized, result })
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
}

const TIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// Full table dump: `omega,beta,route1,route2,dose_ug`.
pub fn table_csv<S: Scalar>(rows: &[CandidateEvaluation<S>]) -> String {
    let mut w = csv_writer();
    w.write_record(["omega", "beta", "route1", "route2", "dose_ug"]).expect("write");
    for r in rows {
        w.write_record([
            r.omega.format(TIME_FORMAT).to_string(),
            r.beta_minutes.to_string(),
            r.route1_id.clone(),
            r.route2_id.clone(),
            r.dose_ug.to_string(),
        ])
        .expect("write");
    }
    finish(w)
}

pub fn summary_csv<S: Scalar>(rows: &[SummaryRow<S>]) -> String {
    let mut w = csv_writer();
    w.write_record([
        "mode",
        "search",
        "granularity",
        "original_daily_ug",
        "minimized_daily_ug",
        "reduction_percent",
        "evaluation_count",
        "wall_time_s",
    ])
    .expect("write");
    for r in rows {
        w.write_record([
            r.mode.to_string(),
            r.search.to_string(),
            r.granularity.to_string(),
            r.original_daily_ug.to_string(),
            r.minimized_daily_ug.to_string(),
            r.reduction_percent.to_string(),
            r.evaluation_count.to_string(),
            format!("{:.6}", r.wall_time_s),
        ])
        .expect("write");
    }
    finish(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
pub struct SweepRow<S> {
    pub granularity: u32,
    pub min_commute_dose_ug: S,
    pub minimized_daily_ug: S,
    pub reduction_percent: S,
    pub evaluation_count: usize,
    pub wall_time_s: f64,
}

impl<S: Scalar> From<&OptimizationReport<S>> for SweepRow<S> {
    fn from(r: &OptimizationReport<S>) -> Self {
        Self {
            granularity: r.summary.granularity,
            min_commute_dose_ug: r.result.min_dose_ug,
            minimized_daily_ug: r.summary.minimized_daily_ug,
            reduction_percent: r.summary.reduction_percent,
            evaluation_count: r.summary.evaluation_count,
            wall_time_s: r.summary.wall_time_s,
        }
    }
}

pub fn sweep_csv<S: Scalar>(rows: &[SweepRow<S>]) -> String {
    let mut w = csv_writer();
    w.write_record(["t", "min_commute_dose_ug", "minimized_daily_ug", "reduction_percent", "evaluation_count", "wall_time_s"])
        .expect("write");
    for r in rows {
        w.write_record([
            r.granularity.to_string(),
            r.min_commute_dose_ug.to_string(),
            r.minimized_daily_ug.to_string(),
            r.reduction_percent.to_string(),
            r.evaluation_count.to_string(),
            format!("{:.6}", r.wall_time_s),
        ])
        .expect("write");
    }
    finish(w)
}

/// Exposure profile plus the per-minute series it was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
pub struct ProfileDocument<S> {
    pub profile: ExposureProfile<S>,
    pub series: Vec<DosePoint<S>>,
}

impl<S: Scalar> ProfileDocument<S> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile serializes")
    }
}

/// Per-minute dose series with the category each minute was filed under.
pub fn series_csv<S: Scalar>(trace: &Trace<S>, series: &[DosePoint<S>], opts: &ProfileOptions) -> String {
    let mut w = csv_writer();
    w.write_record(["time", "activity_mode", "category", "pc_ppm", "pc_ug_l", "ee_kcal_min", "vr_l_min", "dose_ug_min"])
        .expect("write");
    for (r, p) in trace.records.iter().zip(series) {
        let s = &p.sample;
        w.write_record([
            p.timestamp.format(TIME_FORMAT).to_string(),
            r.activity_mode.to_string(),
            classify_location(r, &trace.places, opts.radius_m).as_str().to_owned(),
            p.pc_ppm.to_string(),
            s.pc_ug_l.to_string(),
            s.ee_kcal_min.to_string(),
            s.vr_l_min.to_string(),
            s.dose_ug_min.to_string(),
        ])
        .expect("write");
    }
    finish(w)
}

/// Share table: one row per category.
pub fn shares_csv<S: Scalar>(profile: &ExposureProfile<S>) -> String {
    let mut w = csv_writer();
    w.write_record(["category", "time_minutes", "time_share", "dose_ug", "dose_share"]).expect("write");
    for c in Category::ALL {
        let s = profile.share(c);
        w.write_record([
            c.as_str().to_owned(),
            s.time_minutes.to_string(),
            s.time_share.to_string(),
            s.dose_ug.to_string(),
            s.dose_share.to_string(),
        ])
        .expect("write");
    }
    finish(w)
}

/// Dose series and profile for a trace over a field.
pub fn profile_document<S: Scalar, F: crate::field::ConcentrationField<S> + ?Sized>(
    trace: &Trace<S>,
    field: &F,
    params: &crate::dose::DoseModelParams<S>,
    source: crate::dose::EeSource,
    opts: &ProfileOptions,
) -> Result<ProfileDocument<S>, crate::trace::TraceError> {
    let series = crate::trace::dose_series(trace, field, params, source)?;
    let profile = crate::trace::exposure_profile(trace, &series, opts)?;
    Ok(ProfileDocument { profile, series })
}

/// Pretty JSON, the one rendering every interface emits.
pub fn to_pretty_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("document serializes")
}

/// The exposure profile document served by `GET /traces/{id}/profile` and
/// printed by `dosewise profile`.
pub fn profile_json<S: Scalar, F: crate::field::ConcentrationField<S> + ?Sized>(
    trace: &Trace<S>,
    field: &F,
    params: &crate::dose::DoseModelParams<S>,
    source: crate::dose::EeSource,
    opts: &ProfileOptions,
) -> Result<String, crate::trace::TraceError> {
    Ok(to_pretty_json(&profile_document(trace, field, params, source, opts)?.profile))
}

/// Expanded per-minute paths, `route_id,minute,lat,lon`.
pub fn routes_csv(routes: &[crate::routing::RouteProfile]) -> String {
    let mut w = csv_writer();
    w.write_record(["route_id", "minute", "lat", "lon"]).expect("write");
    for r in routes {
        for s in crate::routing::expand_per_minute(r).samples {
            w.write_record([r.route_id.clone(), s.minute_offset.to_string(), s.pos.lat.to_string(), s.pos.lon.to_string()])
                .expect("write");
        }
    }
    finish(w)
}
