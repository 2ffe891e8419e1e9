use alloc::string::String;
use core::fmt;

use crate::vector::Axis;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter or input violates a documented invariant.
    Invalid { what: &'static str, reason: String },
    /// The matrix is singular or its condition number exceeds the limit.
    IllConditioned { condition: f64, limit: f64 },
    /// The regression design matrix does not have full column rank.
    RankDeficient { rank: usize, columns: usize },
    /// Not enough samples for the requested estimate.
    InsufficientData { needed: usize, got: usize },
    /// Integration step exceeds the stability guard of the integrator.
    StepTooLarge { dt: f64, max_dt: f64 },
    /// The closed loop diverged.
    Unstable {
        time_s: f64,
        axis: Axis,
        value: f64,
        bound: f64,
    },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerical path (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::Invalid { .. } | Error::InsufficientData { .. })
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Invalid { what, reason } => write!(f, "invalid {what}: {reason}"),
            Error::IllConditioned { condition, limit } => write!(
                f,
                "matrix is ill-conditioned (condition number {condition:.3e}, limit {limit:.1e})"
            ),
            Error::RankDeficient { rank, columns } => {
                write!(f, "regression is rank deficient (rank {rank} of {columns} columns)")
            }
            Error::InsufficientData { needed, got } => {
                write!(f, "insufficient data: need at least {needed} samples, got {got}")
            }
            Error::StepTooLarge { dt, max_dt } => {
                write!(f, "integration step {dt:.3e} s exceeds stability limit {max_dt:.3e} s")
            }
            Error::Unstable {
                time_s,
                axis,
                value,
                bound,
            } => write!(
                f,
                "closed loop diverged at t = {time_s:.4} s: {} = {value:.4e} {} exceeds bound {bound:.4e}",
                axis.label(),
                axis.unit()
            ),
        }
    }
}

impl core::error::Error for Error {}
