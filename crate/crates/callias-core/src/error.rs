//! Error taxonomy shared by all modules.
//!
//! Errors fall into three classes, mirrored by the CLI exit codes:
//! configuration/validation failures, numerical failures (a tolerance or
//! convergence guarantee broke), and identity violations (an integer index
//! identity failed). [`CoreError::class`] reports the class.

use thiserror::Error;

/// Failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// The configuration or model description is invalid.
    Config,
    /// A numerical guarantee failed (convergence, tolerance, conditioning).
    Numerical,
    /// An integer index identity failed. The scientific alarm bell.
    Identity,
}

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("assumption {name} violated: {detail}")]
    AssumptionViolation { name: &'static str, detail: String },

    #[error("temporal collar violated: {0}")]
    CollarViolation(String),

    #[error("perturbation support violates declared radius: {0}")]
    SupportViolation(String),

    #[error("potential is not strongly Callias: {0}")]
    NotCallias(String),

    #[error("essential support is vacuous on a compact domain")]
    CompactDomain,

    #[error("resolution too low: {got} < {min}")]
    ResolutionTooLow { got: usize, min: usize },

    #[error("grid kind does not match model domain")]
    GridModelMismatch,

    #[error("eigensolver failed to converge: {0}")]
    ConvergenceFailure(String),

    #[error(
        "ambiguous kernel: eigenvalue magnitude {lambda:.3e} falls in the guard band ({tol:.3e}, {band:.3e})"
    )]
    AmbiguousKernel { lambda: f64, tol: f64, band: f64 },

    #[error("contour passes within {0:.3e} of the spectrum")]
    ContourHitsSpectrum(f64),

    #[error("contour quadrature did not converge: last doubling changed result by {0:.3e}")]
    QuadratureNotConverged(f64),

    #[error("step count too low: {got} < {min}")]
    StepCountTooLow { got: usize, min: usize },

    #[error("time stepping did not converge: doubling steps changed Q by {0:.3e}")]
    NotConverged(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("eigenvalue track matching ambiguous near s = {0}")]
    TrackMatchingAmbiguous(f64),

    #[error("eta window unreliable: {0}")]
    WindowUnreliable(String),

    #[error("problem too large: {detail}")]
    ProblemTooLarge { detail: String },

    #[error("index identity violated: {name} (lhs = {lhs}, rhs = {rhs})")]
    IdentityViolation { name: String, lhs: i64, rhs: i64 },
}

impl CoreError {
    pub fn class(&self) -> ErrorClass {
        use CoreError::*;
        match self {
            AssumptionViolation { .. }
            | CollarViolation(_)
            | SupportViolation(_)
            | NotCallias(_)
            | CompactDomain
            | ResolutionTooLow { .. }
            | GridModelMismatch
            | StepCountTooLow { .. }
            | DimensionMismatch(_)
            | ProblemTooLarge { .. } => ErrorClass::Config,
            ConvergenceFailure(_)
            | AmbiguousKernel { .. }
            | ContourHitsSpectrum(_)
            | QuadratureNotConverged(_)
            | NotConverged(_)
            | TrackMatchingAmbiguous(_)
            | WindowUnreliable(_) => ErrorClass::Numerical,
            IdentityViolation { .. } => ErrorClass::Identity,
        }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
