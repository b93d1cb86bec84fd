use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("validation failed: {0}")]
    Validation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A continuous branch cannot be followed because consecutive samples of
    /// the path jump by at least `limit` radians.
    #[error("grid too coarse at sample {index}: argument jump {jump:.6} rad (limit {limit:.6})")]
    GridTooCoarse { index: usize, jump: f64, limit: f64 },

    #[error("integration step rejected at t = {t}: error estimate {estimate:e} exceeds {tolerance:e}")]
    StepRejected { t: f64, estimate: f64, tolerance: f64 },

    #[error("not a regular value: |X| = {norm:e} below {threshold:e}")]
    NonRegular { norm: f64, threshold: f64 },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("index {index} out of range 0..{len}")]
    Index { index: usize, len: usize },

    #[error("theta series truncation error {estimate:e} above {tolerance:e}; increase the term count")]
    Truncation { estimate: f64, tolerance: f64 },

    #[error("quadrature not resolved: doubling the nodes changed the result by {change:e} (tolerance {tolerance:e})")]
    Resolution { change: f64, tolerance: f64 },

    #[error("eigensolver did not converge after {iterations} iterations")]
    EigenNoConvergence { iterations: usize },

    #[error("target is within {distance:.4} of the flow graph (minimum {minimum})")]
    TooCloseToGraph { distance: f64, minimum: f64 },

    #[error("unknown tag `{0}`")]
    UnknownTag(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
