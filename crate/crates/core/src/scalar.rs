//! Scalar abstraction shared by every numeric module.
//!
//! Physical quantities (concentrations, energy expenditure, ventilation,
//! dose) are generic over [`Scalar`] so the same code runs in `f32` or
//! `f64`. Geographic coordinates are always `f64`; see [`crate::geo`].

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal into this scalar type.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Relative comparison `|a - b| <= tol * max(|a|, |b|)`.
pub fn rel_eq<S: Scalar>(a: S, b: S, tol: S) -> bool {
    let largest = a.abs().max(b.abs());
    (a - b).abs() <= largest * tol
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_conversion() {
        assert_eq!(<f32 as Scalar>::lit(0.5), 0.5f32);
        assert_eq!(<f64 as Scalar>::lit(0.205), 0.205f64);
    }

    #[test]
    fn relative_equality() {
        assert!(rel_eq(1.0f64, 1.0 + 1e-12, 1e-9));
        assert!(!rel_eq(1.0f64, 1.001, 1e-9));
        assert!(rel_eq(0.0f64, 0.0, 1e-9));
    }
}
