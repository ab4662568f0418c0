use std::collections::BTreeMap;

use chrono::{NaiveDateTime, NaiveTime};
use serde::{Deserialize, Serialize};

use super::{ActivityRecord, Gap, Places, Trace, TraceError};
use crate::dose::{self, DoseError, DoseModelParams, DoseSample, EeSource};
use crate::field::ConcentrationField;
use crate::geo::haversine_m;
use crate::Scalar;

pub const DEFAULT_PLACE_RADIUS_M: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Home,
    Work,
    Commute,
    Other,
}

impl Category {
    pub const ALL: [Category; 4] = [Category::Home, Category::Work, Category::Commute, Category::Other];

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::Home => "home",
            Category::Work => "work",
            Category::Commute => "commute",
            Category::Other => "other",
        }
    }
}

/// Place radius first (home, then work), then travel mode.
pub fn classify_location<S: Scalar>(record: &ActivityRecord<S>, places: &Places, radius_m: f64) -> Category {
    if haversine_m(record.pos, places.home) <= radius_m {
        Category::Home
    } else if haversine_m(record.pos, places.work) <= radius_m {
        Category::Work
    } else if record.activity_mode.commute_mode().is_some() {
        Category::Commute
    } else {
        Category::Other
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
pub struct DosePoint<S> {
    pub timestamp: NaiveDateTime,
    pub pc_ppm: S,
    pub sample: DoseSample<S>,
}

/// One dose sample per record, with the concentration looked up at the
/// record's position and time and converted to µg/L.
pub fn dose_series<S: Scalar, F: ConcentrationField<S> + ?Sized>(
    trace: &Trace<S>,
    field: &F,
    params: &DoseModelParams<S>,
    source: EeSource,
) -> Result<Vec<DosePoint<S>>, TraceError> {
    dose_series_with_residuals(trace, field, params, source, |_| S::zero())
}

/// Like [`dose_series`] with a per-record RMR residual (stochastic mode).
pub fn dose_series_with_residuals<S: Scalar, F: ConcentrationField<S> + ?Sized>(
    trace: &Trace<S>,
    field: &F,
    params: &DoseModelParams<S>,
    source: EeSource,
    mut residual: impl FnMut(usize) -> S,
) -> Result<Vec<DosePoint<S>>, TraceError> {
    trace
        .records
        .iter()
        .enumerate()
        .map(|(index, r)| {
            let pc_ppm = field.concentration_at(r.pos, r.timestamp).map_err(|source| TraceError::Field { index, source })?;
            let dose_err = |source: DoseError| TraceError::Dose { index, source };
            let pc = dose::ppm_to_ug_per_liter(pc_ppm, &params.conversion).map_err(dose_err)?;
            let sample = dose::dose_for_record_with(r, &trace.person, params, pc, source, residual(index)).map_err(dose_err)?;
            Ok(DosePoint { timestamp: r.timestamp, pc_ppm, sample })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileOptions {
    pub radius_m: f64,
    /// Inclusive time-of-day window; records outside are not categorized.
    pub window: Option<(NaiveTime, NaiveTime)>,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            radius_m: DEFAULT_PLACE_RADIUS_M,
            window: Some((
                NaiveTime::from_hms_opt(8, 0, 0).expect("valid time"),
                NaiveTime::from_hms_opt(23, 59, 59).expect("valid time"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
pub struct CategoryShare<S> {
    pub time_minutes: u64,
    pub dose_ug: S,
    pub time_share: S,
    pub dose_share: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
pub struct ExposureProfile<S> {
    pub categories: BTreeMap<Category, CategoryShare<S>>,
    pub total_minutes: u64,
    pub total_dose_ug: S,
    pub gaps: Vec<Gap>,
}

impl<S: Scalar> ExposureProfile<S> {
    pub fn share(&self, c: Category) -> &CategoryShare<S> {
        &self.categories[&c]
    }
}

/// Time and dose shares per category. Each record stands for one minute;
/// missing minutes count towards nothing. With a zero total the shares are 0.
pub fn exposure_profile<S: Scalar>(
    trace: &Trace<S>,
    series: &[DosePoint<S>],
    opts: &ProfileOptions,
) -> Result<ExposureProfile<S>, TraceError> {
    if series.len() != trace.records.len() {
        return Err(TraceError::Alignment { expected: trace.records.len(), got: series.len() });
    }
    if let Some(i) = trace.records.iter().zip(series).position(|(r, p)| r.timestamp != p.timestamp) {
        return Err(TraceError::Invalid(format!("series point {i} is not aligned with its record")));
    }
    let mut acc: BTreeMap<Category, (u64, S)> = Category::ALL.iter().map(|c| (*c, (0, S::zero()))).collect();
    for (r, p) in trace.records.iter().zip(series) {
        if let Some((start, end)) = opts.window {
            let tod = r.timestamp.time();
            if tod < start || tod > end {
                continue;
            }
        }
        let slot = acc.get_mut(&classify_location(r, &trace.places, opts.radius_m)).expect("all categories present");
        slot.0 += 1;
        slot.1 = slot.1 + p.sample.dose_ug_min;
    }
    let total_minutes: u64 = acc.values().map(|v| v.0).sum();
    let total_dose_ug: S = acc.values().map(|v| v.1).sum();
    let ratio = |part: S, whole: S| if whole > S::zero() { part / whole } else { S::zero() };
    let categories = acc
        .into_iter()
        .map(|(c, (minutes, dose))| {
            let share = CategoryShare {
                time_minutes: minutes,
                dose_ug: dose,
                time_share: ratio(S::lit(minutes as f64), S::lit(total_minutes as f64)),
                dose_share: ratio(dose, total_dose_ug),
            };
            (c, share)
        })
        .collect();
    Ok(ExposureProfile { categories, total_minutes, total_dose_ug, gaps: trace.gaps() })
}

/// Percent reduction `100 (original - minimized) / original`, unrounded.
pub fn reduction_percent<S: Scalar>(original_ug: S, minimized_ug: S) -> Result<S, TraceError> {
    if !(original_ug.is_finite() && original_ug > S::zero()) {
        return Err(TraceError::Invalid(format!("original dose must be positive, got {original_ug}")));
    }
    if !(minimized_ug.is_finite() && minimized_ug >= S::zero()) {
        return Err(TraceError::Invalid(format!("minimized dose must be >= 0, got {minimized_ug}")));
    }
    Ok(S::lit(100.0) * (original_ug - minimized_ug) / original_ug)
}

/// Presentation rounding to one decimal place.
pub fn round_one_decimal<S: Scalar>(v: S) -> S {
    (v * S::lit(10.0)).round() / S::lit(10.0)
}
