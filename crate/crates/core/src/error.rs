use thiserror::Error;

use crate::expr::ParseError;

/// Errors produced by the numerical laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("point {t} is not a grid point")]
    NotOnGrid { t: f64 },

    #[error("functions are sampled on different grids")]
    GridMismatch,

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("non-finite value {value} at t = {t}, n = {n}")]
    NonFinite { t: f64, n: f64, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),

    #[error("probe index {index:e} exceeds 1e300")]
    IndexOverflow { index: f64 },

    #[error("eps = {eps} is not above the grid step {step}; refine the grid")]
    BelowGridResolution { eps: f64, step: f64 },

    #[error("inconsistent bracket for {measure}: lower {lower} > upper {upper}")]
    InconsistentBracket {
        measure: &'static str,
        lower: f64,
        upper: f64,
    },

    #[error("ensemble diverged at iteration {iteration}: diameter {diameter}")]
    Diverged { iteration: usize, diameter: f64 },

    #[error("fixed-point iteration did not reach tol after {iters} steps (best residual {residual:e})")]
    NotConverged {
        best: Box<crate::family::SampledFunction>,
        residual: f64,
        iters: usize,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
