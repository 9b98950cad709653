use thiserror::Error;

use crate::modes::ModeSet;

/// Failure classes, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numerical,
    Io,
    Parse,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("bandwidths must be positive and finite (h1 = {h1}, h2 = {h2})")]
    InvalidBandwidths { h1: f64, h2: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("zero-width weight window: {0}")]
    DegenerateWindow(String),

    #[error("conditional density undefined at x = {x}: kernel denominator underflows")]
    UndefinedEstimate { x: f64 },

    #[error("no local support for mean shift at x = {x}")]
    NoLocalSupport { x: f64 },

    #[error("mean shift did not converge from any start at x = {} ({} partial end points)", .partial.at_x, .partial.len())]
    NoConvergence { partial: ModeSet },

    #[error("no modes found at x = {x}")]
    NoModes { x: f64 },

    #[error("set distance requires nonempty sets")]
    EmptySet,

    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    #[error("x = {x} lies outside the B-spline span [{lo}, {hi}]")]
    OutsideSpan { x: f64, lo: f64, hi: f64 },

    #[error("EM fit degenerate: {0}")]
    EmDegenerate(String),

    #[error("degenerate curvature in reference rule: {0}")]
    DegenerateCurvature(String),

    #[error("leave-one-out estimate undefined at observation {index}")]
    LeaveOneOutUndefined { index: usize },

    #[error("no feasible bandwidth candidate: {0}")]
    NoFeasibleCandidate(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}, line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("serialization failed: {0}")]
    Serialize(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. } | Error::Serialize(_) => ErrorClass::Io,
            Error::Parse { .. } => ErrorClass::Parse,
            Error::InvalidSample(_)
            | Error::InvalidBandwidths { .. }
            | Error::InvalidConfig(_)
            | Error::DegenerateWindow(_) => ErrorClass::Validation,
            _ => ErrorClass::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
