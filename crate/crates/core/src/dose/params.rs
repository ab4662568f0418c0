//! Dose-model parameter file.
//!
//! The regression constants of the energy-expenditure and ventilation
//! equations are not fixed by the model itself; they are supplied per
//! (gender, age band) through a versioned JSON document. The bundled
//! fixture (`data/dose_params.v1.json`) holds documented, non-authoritative
//! values used by tests and examples.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DoseError, Gender};
use crate::activity::ActivityMode;
use crate::Scalar;

pub const MIN_AGE_YEARS: u32 = 5;
pub const MAX_AGE_YEARS: u32 = 120;

const FIXTURE_JSON: &str = include_str!("../../data/dose_params.v1.json");

/// Regression constants for one (gender, age range) band. Ages inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
#[serde(deny_unknown_fields)]
pub struct ParamBand<S> {
    pub gender: Gender,
    pub age_min: u32,
    pub age_max: u32,
    /// RMR intercept, MJ/day.
    pub rmr_a: S,
    /// RMR slope, MJ/day/kg.
    pub rmr_b: S,
    /// Standard deviation of the RMR residual, MJ/day.
    pub rmr_e_sd: S,
    pub vent_c: S,
    pub vent_d: S,
}

/// ppm to µg/L conversion constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
#[serde(deny_unknown_fields)]
pub struct Conversion<S> {
    /// g/mol; 28.01 for CO.
    pub molar_mass_g_mol: S,
    /// L/mol; 24.45 at 25 °C and 1 atm.
    pub molar_volume_l_mol: S,
}

impl<S: Scalar> Default for Conversion<S> {
    fn default() -> Self {
        Self { molar_mass_g_mol: S::lit(28.01), molar_volume_l_mol: S::lit(24.45) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
#[serde(deny_unknown_fields)]
pub struct DoseModelParams<S> {
    pub version: String,
    pub bands: Vec<ParamBand<S>>,
    /// Energy conversion factor, liters O2 per kcal.
    #[serde(default = "default_ecf")]
    pub ecf: S,
    pub met: BTreeMap<ActivityMode, S>,
    #[serde(default)]
    pub conversion: Conversion<S>,
}

fn default_ecf<S: Scalar>() -> S {
    S::lit(0.205)
}

impl<S: Scalar> DoseModelParams<S> {
    /// The bundled fixture parameter set.
    pub fn fixture() -> Self {
        Self::from_json(FIXTURE_JSON).expect("bundled parameter fixture is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, DoseError> {
        let params: Self =
            serde_json::from_str(text).map_err(|e| DoseError::Parameter(format!("parameter file: {e}")))?;
        params.validate()?;
        Ok(params)
    }

    pub fn load(path: &Path) -> Result<Self, DoseError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DoseError::Parameter(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("parameters serialize")
    }

    pub fn validate(&self) -> Result<(), DoseError> {
        check_ecf(self.ecf)?;
        for (mode, met) in &self.met {
            if !met.is_finite() || *met < S::lit(0.9) {
                return Err(DoseError::Parameter(format!("MET for {mode} must be finite and >= 0.9, got {met}")));
            }
        }
        let c = &self.conversion;
        if !(c.molar_mass_g_mol.is_finite() && c.molar_mass_g_mol > S::zero())
            || !(c.molar_volume_l_mol.is_finite() && c.molar_volume_l_mol > S::zero())
        {
            return Err(DoseError::Parameter("conversion constants must be positive".into()));
        }
        for band in &self.bands {
            let finite = [band.rmr_a, band.rmr_b, band.rmr_e_sd, band.vent_c, band.vent_d]
                .iter()
                .all(|v| v.is_finite());
            if !finite || band.rmr_e_sd < S::zero() {
                return Err(DoseError::Parameter(format!(
                    "band {:?} {}-{} has non-finite or negative constants",
                    band.gender, band.age_min, band.age_max
                )));
            }
            if band.age_min > band.age_max {
                return Err(DoseError::Parameter(format!(
                    "band {:?} has age_min {} > age_max {}",
                    band.gender, band.age_min, band.age_max
                )));
            }
        }
        for gender in [Gender::Male, Gender::Female] {
            let mut bands: Vec<_> = self.bands.iter().filter(|b| b.gender == gender).collect();
            bands.sort_by_key(|b| b.age_min);
            let mut next = MIN_AGE_YEARS;
            for b in &bands {
                if b.age_min != next {
                    return Err(DoseError::Parameter(format!(
                        "{gender:?} bands must be contiguous and non-overlapping: expected a band starting at {next}, found {}",
                        b.age_min
                    )));
                }
                next = b.age_max + 1;
            }
            if next != MAX_AGE_YEARS + 1 {
                return Err(DoseError::Parameter(format!(
                    "{gender:?} bands must cover ages {MIN_AGE_YEARS}..={MAX_AGE_YEARS}"
                )));
            }
        }
        Ok(())
    }

    pub fn band(&self, gender: Gender, age_years: u32) -> Result<&ParamBand<S>, DoseError> {
        let mut hits = self
            .bands
            .iter()
            .filter(|b| b.gender == gender && (b.age_min..=b.age_max).contains(&age_years));
        match (hits.next(), hits.next()) {
            (Some(b), None) => Ok(b),
            _ => Err(DoseError::NoBand { gender, age_years }),
        }
    }

    pub fn met_for(&self, mode: ActivityMode) -> Result<S, DoseError> {
        self.met.get(&mode).copied().ok_or(DoseError::MissingMet(mode))
    }

    /// Returns a copy with a different energy conversion factor.
    pub fn with_ecf(mut self, ecf: S) -> Result<Self, DoseError> {
        check_ecf(ecf)?;
        self.ecf = ecf;
        Ok(self)
    }
}

pub(crate) fn check_ecf<S: Scalar>(ecf: S) -> Result<(), DoseError> {
    if ecf.is_finite() && ecf >= S::lit(0.20) && ecf <= S::lit(0.21) {
        Ok(())
    } else {
        Err(DoseError::Parameter(format!("ECF must lie in [0.20, 0.21], got {ecf}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_loads_and_covers_all_ages() {
        let p = DoseModelParams::<f64>::fixture();
        for age in MIN_AGE_YEARS..=MAX_AGE_YEARS {
            p.band(Gender::Male, age).unwrap();
            p.band(Gender::Female, age).unwrap();
        }
        assert_eq!(p.ecf, 0.205);
        assert!(p.band(Gender::Male, 4).is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(FIXTURE_JSON).unwrap();
        v["surprise"] = serde_json::json!(1);
        let err = DoseModelParams::<f64>::from_json(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("surprise"), "{err}");
    }

    #[test]
    fn overlapping_bands_rejected() {
        let mut p = DoseModelParams::<f64>::fixture();
        let mut extra = p.bands[0].clone();
        extra.age_max += 3;
        p.bands.push(extra);
        assert!(p.validate().is_err());
    }

    #[test]
    fn ecf_range_enforced() {
        let p = DoseModelParams::<f64>::fixture();
        assert!(p.clone().with_ecf(0.215).is_err());
        assert_eq!(p.with_ecf(0.20).unwrap().ecf, 0.20);
    }

    #[test]
    fn met_lower_bound_enforced() {
        let mut p = DoseModelParams::<f64>::fixture();
        p.met.insert(ActivityMode::Home, 0.5);
        assert!(p.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let p = DoseModelParams::<f64>::fixture();
        assert_eq!(DoseModelParams::from_json(&p.to_json()).unwrap(), p);
    }
}
