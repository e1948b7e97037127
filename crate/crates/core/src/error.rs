use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("mollifier under-resolved: support radius {support_radius} < 4 dx = {min_radius}")]
    UnderResolvedMollifier { support_radius: f64, min_radius: f64 },

    #[error("mollifier support radius {support_radius} does not fit inside half a period ({half_period})")]
    MollifierTooWide { support_radius: f64, half_period: f64 },

    #[error("parabolic stability violated: margin 1 - 2d dt/dx^2 = {margin}")]
    StabilityViolation { margin: f64 },

    #[error("non-positive value {value} at step {step}, node {node}")]
    NonPositive { step: usize, node: usize, value: f64 },

    #[error("off-grid point: {0}")]
    OffGrid(String),

    #[error("path too short: {0} samples, need at least 2")]
    PathTooShort(usize),

    #[error("factor {factor} does not divide {what} = {value}")]
    NonDivisible { factor: usize, what: &'static str, value: usize },

    #[error("test function support violation: {0}")]
    SupportViolation(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("noise realization does not match the one the trajectory was built from")]
    MismatchedRealization,

    #[error("too few Monte Carlo paths: {0} (need at least 100)")]
    TooFewPaths(usize),

    #[error("delta-net width eps = {eps} too large for horizon T = {horizon} (need 2 eps < T)")]
    EpsTooLarge { eps: f64, horizon: f64 },

    #[error("order fit needs at least 3 resolutions, got {0}")]
    TooFewResolutions(usize),

    #[error("order fit needs positive values, got {0}")]
    NonPositiveGap(f64),

    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{count} error(s) during study: {first}")]
    Aggregate { count: usize, first: Box<Error> },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig { field: field.into(), reason: reason.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
