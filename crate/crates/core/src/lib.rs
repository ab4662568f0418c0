//! Personal inhaled air-pollution dose estimation and commute dose
//! minimization.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the bottom of this file name the common `f64` and `f32` instantiations.

pub mod activity;
pub mod dose;
pub mod field;
pub mod geo;
pub mod minimizer;
pub mod report;
pub mod routing;
pub mod scalar;
pub mod scenario;
pub mod trace;

use thiserror::Error;

pub use activity::{ActivityMode, CommuteMode};
pub use geo::LatLon;
pub use scalar::Scalar;

/// Any library error, classified for exit codes and HTTP statuses.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Dose(#[from] dose::DoseError),
    #[error(transparent)]
    Field(#[from] field::FieldError),
    #[error(transparent)]
    Routing(#[from] routing::RoutingError),
    #[error(transparent)]
    Trace(#[from] trace::TraceError),
    #[error(transparent)]
    Minimizer(#[from] minimizer::MinimizerError),
    #[error(transparent)]
    Scenario(#[from] scenario::ScenarioError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input: malformed files, constraint violations.
    Validation,
    /// A referenced asset does not exist.
    MissingAsset,
    /// Valid input that fails at run time, e.g. a lookup outside field bounds.
    Runtime,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use field::FieldError as F;
        use minimizer::MinimizerError as M;
        use trace::TraceError as T;
        match self {
            Error::Field(F::OutOfBounds { .. }) | Error::Field(F::Io(_)) => ErrorKind::Runtime,
            Error::Trace(T::Field { .. }) | Error::Trace(T::Dose { .. }) => ErrorKind::Runtime,
            Error::Minimizer(M::InvalidScenario(_)) | Error::Minimizer(M::VentilationLength { .. }) => ErrorKind::Validation,
            Error::Minimizer(M::Ventilation { .. }) => ErrorKind::Validation,
            Error::Minimizer(_) => ErrorKind::Runtime,
            Error::Scenario(scenario::ScenarioError::MissingAsset { .. }) => ErrorKind::MissingAsset,
            Error::Routing(routing::RoutingError::Io(_)) => ErrorKind::Runtime,
            _ => ErrorKind::Validation,
        }
    }
}

pub type DoseModelParams64 = dose::DoseModelParams<f64>;
pub type DoseModelParams32 = dose::DoseModelParams<f32>;
pub type PersonProfile64 = dose::PersonProfile<f64>;
pub type PersonProfile32 = dose::PersonProfile<f32>;
pub type DoseSample64 = dose::DoseSample<f64>;
pub type GridField64 = field::GridField<f64>;
pub type GridField32 = field::GridField<f32>;
pub type SyntheticField64 = field::SyntheticField<f64>;
pub type SyntheticField32 = field::SyntheticField<f32>;
pub type Trace64 = trace::Trace<f64>;
pub type Trace32 = trace::Trace<f32>;
pub type ExposureProfile64 = trace::ExposureProfile<f64>;
pub type Scenario64 = minimizer::Scenario<f64>;
pub type Scenario32 = minimizer::Scenario<f32>;
pub type OptimizationResult64 = minimizer::OptimizationResult<f64>;
pub type OptimizationResult32 = minimizer::OptimizationResult<f32>;
pub type OptimizationReport64 = report::OptimizationReport<f64>;
