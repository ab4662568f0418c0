//! Personal inhaled-dose chain.
//!
//! Converts personal and activity data to a per-minute inhaled dose:
//!
//! ```text
//! RMR = 0.166 (a + b BM + e)              kcal/min
//! EE  = MET RMR                           kcal/min
//! VO2 = ECF EE                            L O2/min
//! VR  = BM exp(c + d ln(VO2 / BM))        L/min
//! ID  = VR PC                             µg/min
//! ```
//!
//! When a wearable sensor supplies EE directly, the first two steps are
//! skipped. Concentrations enter in µg/L; [`ppm_to_ug_per_liter`] converts
//! mixing ratios at the field boundary. One mg/m³ equals one µg/L, so the
//! conversion `ppm × M / Vm` yields µg/L directly.

mod params;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use params::{Conversion, DoseModelParams, ParamBand, MAX_AGE_YEARS, MIN_AGE_YEARS};

use crate::activity::ActivityMode;
use crate::trace::ActivityRecord;
use crate::Scalar;

/// MJ/day to kcal/min.
pub const MJ_PER_DAY_TO_KCAL_PER_MIN: f64 = 0.166;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DoseError {
    #[error("no parameter band for {gender:?} aged {age_years}")]
    NoBand { gender: Gender, age_years: u32 },
    #[error("numeric domain error: {0}")]
    NumericDomain(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("activity mode {0} missing from MET table")]
    MissingMet(ActivityMode),
    #[error("record has no sensor EE reading")]
    MissingSensorEe,
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
#[serde(deny_unknown_fields)]
pub struct PersonProfile<S> {
    pub age_years: u32,
    pub gender: Gender,
    pub body_mass_kg: S,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stature_cm: Option<S>,
}

impl<S: Scalar> PersonProfile<S> {
    pub fn new(age_years: u32, gender: Gender, body_mass_kg: S) -> Result<Self, DoseError> {
        let p = Self { age_years, gender, body_mass_kg, stature_cm: None };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), DoseError> {
        if !(self.body_mass_kg.is_finite() && self.body_mass_kg > S::zero()) {
            return Err(DoseError::InvalidProfile(format!(
                "body mass must be positive and finite, got {}",
                self.body_mass_kg
            )));
        }
        if !(MIN_AGE_YEARS..=MAX_AGE_YEARS).contains(&self.age_years) {
            return Err(DoseError::InvalidProfile(format!(
                "age must lie in [{MIN_AGE_YEARS}, {MAX_AGE_YEARS}], got {}",
                self.age_years
            )));
        }
        Ok(())
    }
}

/// One minute of the dose chain, all intermediates at full precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
pub struct DoseSample<S> {
    pub rmr_kcal_min: S,
    pub ee_kcal_min: S,
    pub vo2_l_min: S,
    pub vr_l_min: S,
    pub pc_ug_l: S,
    pub dose_ug_min: S,
}

/// Where the energy expenditure of a record comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EeSource {
    /// Sensor reading when present, MET lookup otherwise.
    #[default]
    Auto,
    /// Sensor reading only; records without one are an error.
    Sensor,
    /// MET lookup on the activity mode, ignoring sensor readings. This is the
    /// "manual" path a non-sensor user gets.
    Met,
}

fn non_negative<S: Scalar>(name: &str, v: S) -> Result<S, DoseError> {
    if v.is_finite() && v >= S::zero() {
        Ok(v)
    } else {
        Err(DoseError::Domain(format!("{name} must be finite and >= 0, got {v}")))
    }
}

fn finite<S: Scalar>(what: &str, v: S) -> Result<S, DoseError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(DoseError::NumericDomain(format!("{what} is not finite")))
    }
}

/// Resting metabolic rate in kcal/min for residual `e` (MJ/day).
pub fn resting_metabolic_rate<S: Scalar>(
    profile: &PersonProfile<S>,
    params: &DoseModelParams<S>,
    e: S,
) -> Result<S, DoseError> {
    profile.validate()?;
    let band = params.band(profile.gender, profile.age_years)?;
    rmr_from_band(band, profile.body_mass_kg, e)
}

pub(crate) fn rmr_from_band<S: Scalar>(band: &ParamBand<S>, body_mass_kg: S, e: S) -> Result<S, DoseError> {
    finite("RMR residual", e)?;
    let rmr = S::lit(MJ_PER_DAY_TO_KCAL_PER_MIN) * (band.rmr_a + band.rmr_b * body_mass_kg + e);
    finite("RMR", rmr)
}

/// Draws an RMR residual from N(0, sd) for the profile's band.
pub fn draw_rmr_residual<S: Scalar, R: Rng + ?Sized>(
    profile: &PersonProfile<S>,
    params: &DoseModelParams<S>,
    rng: &mut R,
) -> Result<S, DoseError> {
    let band = params.band(profile.gender, profile.age_years)?;
    let sd = band.rmr_e_sd.to_f64_lossy();
    if sd == 0.0 {
        return Ok(S::zero());
    }
    let normal = Normal::new(0.0, sd).map_err(|e| DoseError::Parameter(e.to_string()))?;
    Ok(S::lit(normal.sample(rng)))
}

/// One residual per seed: the same seed always gives the same person.
pub fn seeded_rmr_residual<S: Scalar>(profile: &PersonProfile<S>, params: &DoseModelParams<S>, seed: u64) -> Result<S, DoseError> {
    use rand::SeedableRng;
    draw_rmr_residual(profile, params, &mut rand_chacha::ChaCha8Rng::seed_from_u64(seed))
}

pub fn energy_expenditure<S: Scalar>(met: S, rmr: S) -> Result<S, DoseError> {
    Ok(non_negative("MET", met)? * non_negative("RMR", rmr)?)
}

pub fn oxygen_uptake<S: Scalar>(ee: S, ecf: S) -> Result<S, DoseError> {
    params::check_ecf(ecf)?;
    Ok(ecf * non_negative("EE", ee)?)
}

/// Ventilation rate in L/min. `vo2 = 0` yields 0 by continuity when `d > 0`.
pub fn ventilation_rate<S: Scalar>(bm: S, vo2: S, c: S, d: S) -> Result<S, DoseError> {
    if !(bm.is_finite() && bm > S::zero()) {
        return Err(DoseError::Domain(format!("body mass must be > 0, got {bm}")));
    }
    non_negative("VO2", vo2)?;
    if vo2 == S::zero() {
        return if d > S::zero() {
            Ok(S::zero())
        } else {
            Err(DoseError::Domain(format!("VO2 = 0 requires d > 0, got d = {d}")))
        };
    }
    finite("ventilation rate", bm * (c + d * (vo2 / bm).ln()).exp())
}

pub fn inhaled_dose<S: Scalar>(vr: S, pc: S) -> Result<S, DoseError> {
    Ok(non_negative("VR", vr)? * non_negative("PC", pc)?)
}

/// Converts a ppm mixing ratio to µg/L (numerically equal to mg/m³).
pub fn ppm_to_ug_per_liter<S: Scalar>(ppm: S, conversion: &Conversion<S>) -> Result<S, DoseError> {
    let (m, vm) = (conversion.molar_mass_g_mol, conversion.molar_volume_l_mol);
    if !(m.is_finite() && m > S::zero() && vm.is_finite() && vm > S::zero()) {
        return Err(DoseError::Parameter("molar mass and molar volume must be positive".into()));
    }
    Ok(non_negative("ppm", ppm)? * m / vm)
}

/// Runs the chain from a known EE onward (VO2, VR, dose).
pub fn chain_from_ee<S: Scalar>(
    profile: &PersonProfile<S>,
    params: &DoseModelParams<S>,
    rmr: S,
    ee: S,
    pc_ug_l: S,
) -> Result<DoseSample<S>, DoseError> {
    let band = params.band(profile.gender, profile.age_years)?;
    let vo2 = oxygen_uptake(ee, params.ecf)?;
    let vr = ventilation_rate(profile.body_mass_kg, vo2, band.vent_c, band.vent_d)?;
    let dose = inhaled_dose(vr, pc_ug_l)?;
    Ok(DoseSample {
        rmr_kcal_min: non_negative("RMR", rmr)?,
        ee_kcal_min: ee,
        vo2_l_min: vo2,
        vr_l_min: vr,
        pc_ug_l,
        dose_ug_min: dose,
    })
}

/// Dose for one record with deterministic RMR (e = 0) and automatic EE source.
pub fn dose_for_record<S: Scalar>(
    record: &ActivityRecord<S>,
    profile: &PersonProfile<S>,
    params: &DoseModelParams<S>,
    pc_ug_l: S,
) -> Result<DoseSample<S>, DoseError> {
    dose_for_record_with(record, profile, params, pc_ug_l, EeSource::Auto, S::zero())
}

pub fn dose_for_record_with<S: Scalar>(
    record: &ActivityRecord<S>,
    profile: &PersonProfile<S>,
    params: &DoseModelParams<S>,
    pc_ug_l: S,
    source: EeSource,
    e: S,
) -> Result<DoseSample<S>, DoseError> {
    let rmr = resting_metabolic_rate(profile, params, e)?;
    let met_ee = || -> Result<S, DoseError> {
        let met = params.met_for(record.activity_mode)?;
        energy_expenditure(met, rmr)
    };
    let ee = match (source, record.sensor_ee) {
        (EeSource::Auto, Some(ee)) | (EeSource::Sensor, Some(ee)) => non_negative("sensor EE", ee)?,
        (EeSource::Sensor, None) => return Err(DoseError::MissingSensorEe),
        (EeSource::Auto, None) | (EeSource::Met, _) => met_ee()?,
    };
    chain_from_ee(profile, params, rmr, ee, pc_ug_l)
}

/// Ventilation rate for sustained activity of the given mode (e = 0).
pub fn ventilation_for_activity<S: Scalar>(
    profile: &PersonProfile<S>,
    params: &DoseModelParams<S>,
    mode: ActivityMode,
) -> Result<S, DoseError> {
    let rmr = resting_metabolic_rate(profile, params, S::zero())?;
    let ee = energy_expenditure(params.met_for(mode)?, rmr)?;
    ventilation_for_ee(profile, params, ee)
}

/// Ventilation rate for a known EE in kcal/min.
pub fn ventilation_for_ee<S: Scalar>(
    profile: &PersonProfile<S>,
    params: &DoseModelParams<S>,
    ee: S,
) -> Result<S, DoseError> {
    Ok(chain_from_ee(profile, params, S::zero(), ee, S::zero())?.vr_l_min)
}
