use thiserror::Error;

/// Errors surfaced by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    /// A scalar argument or field is out of its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A service-level menu violates the ordering contract.
    #[error("invalid service menu: {0}")]
    InvalidMenu(String),

    /// Adaptive quadrature bottomed out before reaching the requested
    /// tolerance; `value` is the best estimate obtained.
    #[error(
        "quadrature did not converge: value {value:.9e}, \
         achieved error estimate {error_estimate:.3e} > tolerance {tolerance:.3e}"
    )]
    QuadratureNonConvergence {
        value: f64,
        error_estimate: f64,
        tolerance: f64,
    },

    /// A Monte-Carlo estimate came back with a standard error above the
    /// configured cap; rerun with a larger draw budget.
    #[error("sample budget too small: standard error {achieved:.3e} > cap {cap:.3e}")]
    SampleBudget { achieved: f64, cap: f64 },

    /// The deadline-pricing target dwell cannot enforce the per-user rate
    /// cap for the given demand support.
    #[error(
        "infeasible target dwell: omega = {omega} hr must exceed \
         x_max / rate_cap = {min_omega} hr"
    )]
    InfeasibleTargetDwell { omega: f64, min_omega: f64 },

    /// A simulated user ended up with a non-positive charging window,
    /// which would imply an unbounded instantaneous rate.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
