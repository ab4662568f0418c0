//! Whole-day dose for a schedule.
//!
//! Outside the two commute legs the subject is stationary: at home before
//! leaving and after returning, at work in between. Home and work minutes are
//! interchangeable, so lengthening the working day simply turns home minutes
//! into work minutes.

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::{commute_dose, prepare_route, return_departure, MinimizerError, Scenario, Schedule};
use crate::activity::ActivityMode;
use crate::dose;
use crate::geo::LatLon;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
#[serde(deny_unknown_fields)]
pub struct DayTemplate<S> {
    /// First minute of the accounted day.
    pub start: NaiveDateTime,
    /// End of the accounted day (exclusive).
    pub end: NaiveDateTime,
    /// Energy expenditure at home, kcal/min. Defaults to the home MET.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub home_ee_kcal_min: Option<S>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub work_ee_kcal_min: Option<S>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
pub struct DayDose<S> {
    pub total_ug: S,
    pub commute_ug: S,
    pub stationary_ug: S,
    pub minutes: u64,
}

fn endpoints(schedule: &Schedule) -> (LatLon, LatLon) {
    let first = &schedule.route1.segments[0].polyline[0];
    let last = schedule.route1.segments.last().and_then(|s| s.polyline.last()).expect("validated route");
    (*first, *last)
}

fn place_vr<S: Scalar>(scenario: &Scenario<S>, ee: Option<S>, mode: ActivityMode) -> Result<S, MinimizerError> {
    Ok(match ee {
        Some(ee) => dose::ventilation_for_ee(&scenario.person, &scenario.params, ee)?,
        None => dose::ventilation_for_activity(&scenario.person, &scenario.params, mode)?,
    })
}

/// Reconstructs the day around `schedule` and sums its per-minute dose. The
/// commute part is exactly the value the optimizer puts in its table.
pub fn full_day_dose<S: Scalar>(
    template: &DayTemplate<S>,
    scenario: &Scenario<S>,
    schedule: &Schedule,
) -> Result<DayDose<S>, MinimizerError> {
    if template.end <= template.start {
        return Err(MinimizerError::Day(format!("day end {} is not after start {}", template.end, template.start)));
    }
    let r1 = prepare_route(scenario, schedule.route1.clone())?;
    let r2 = prepare_route(scenario, schedule.route2.clone())?;
    let leg1 = (schedule.omega, schedule.omega + Duration::minutes(r1.path.len() as i64));
    let back = return_departure(schedule.omega, &r1, schedule.beta_minutes);
    let leg2 = (back, back + Duration::minutes(r2.path.len() as i64));
    if leg1.0 < template.start || leg2.1 > template.end {
        return Err(MinimizerError::Day(format!(
            "commute {} .. {} does not fit the day {} .. {}",
            leg1.0, leg2.1, template.start, template.end
        )));
    }
    let field = scenario.field.as_ref();
    let conv = &scenario.params.conversion;
    let commute_ug = commute_dose(schedule.omega, schedule.beta_minutes, &r1, &r2, field, conv)?;

    let (home, work) = endpoints(schedule);
    let vr_home = place_vr(scenario, template.home_ee_kcal_min, ActivityMode::Home)?;
    let vr_work = place_vr(scenario, template.work_ee_kcal_min, ActivityMode::Work)?;
    let inside = |t: NaiveDateTime, (a, b): (NaiveDateTime, NaiveDateTime)| t >= a && t < b;
    let minutes = (template.end - template.start).num_minutes().max(0) as u64;
    let mut stationary_ug = S::zero();
    for k in 0..minutes {
        let t = template.start + Duration::minutes(k as i64);
        if inside(t, leg1) || inside(t, leg2) {
            continue;
        }
        let (pos, vr) = if t >= leg1.1 && t < leg2.0 { (work, vr_work) } else { (home, vr_home) };
        let ppm = field
            .concentration_at(pos, t)
            .map_err(|e| MinimizerError::Day(format!("stationary minute {t}: {e}")))?;
        stationary_ug = stationary_ug + dose::ppm_to_ug_per_liter(ppm, conv)? * vr;
    }
    Ok(DayDose { total_ug: stationary_ug + commute_ug, commute_ug, stationary_ug, minutes })
}
