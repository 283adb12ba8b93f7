use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// Each variant has a stable machine-readable name (see [`Error::kind`]) that
/// the command line front end prints verbatim.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-positive level {value} at index {index}")]
    NonPositiveLevel { index: usize, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("invalid time series: {0}")]
    InvalidSeries(String),

    #[error("argument outside the function domain: {0}")]
    DomainError(String),

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("singular regression: {0}")]
    SingularRegression(String),

    #[error("estimated AR(1) coefficient b = {b} is outside (0, 1); no mean reversion detected")]
    NonStationaryEstimate { b: f64 },

    #[error("stationarity constraint violated: {0}")]
    StationarityViolated(String),

    #[error("optimizer failed: {0}")]
    OptimizerFailed(String),

    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),

    #[error("too few exceedances: {found} (need at least {required})")]
    TooFewExceedances { found: usize, required: usize },

    #[error("point {x} is outside the distribution support")]
    OutOfSupport { x: f64 },

    #[error("invalid probability {p}: {reason}")]
    InvalidProbability { p: f64, reason: String },

    #[error("GPD shape {xi} >= 1 gives an infinite expected shortfall")]
    ShapeTooHeavy { xi: f64 },

    #[error("jump intensity too large: (lambda_up + lambda_dn) * dt = {0} must be < 1")]
    IntensityTooLarge(f64),

    #[error("parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },

    #[error("dates are not strictly increasing at line {line}")]
    NonMonotoneDates { line: usize },
}

impl Error {
    /// Stable variant name, e.g. `"NonStationaryEstimate"`.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonPositiveLevel { .. } => "NonPositiveLevel",
            Error::InvalidParam(_) => "InvalidParam",
            Error::InvalidSeries(_) => "InvalidSeries",
            Error::DomainError(_) => "DomainError",
            Error::DegenerateSeries(_) => "DegenerateSeries",
            Error::SingularRegression(_) => "SingularRegression",
            Error::NonStationaryEstimate { .. } => "NonStationaryEstimate",
            Error::StationarityViolated(_) => "StationarityViolated",
            Error::OptimizerFailed(_) => "OptimizerFailed",
            Error::QuadratureFailure(_) => "QuadratureFailure",
            Error::TooFewExceedances { .. } => "TooFewExceedances",
            Error::OutOfSupport { .. } => "OutOfSupport",
            Error::InvalidProbability { .. } => "InvalidProbability",
            Error::ShapeTooHeavy { .. } => "ShapeTooHeavy",
            Error::IntensityTooLarge(_) => "IntensityTooLarge",
            Error::ParseError { .. } => "ParseError",
            Error::NonMonotoneDates { .. } => "NonMonotoneDates",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_param(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParam(msg()))
    }
}
