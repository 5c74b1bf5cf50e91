use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("series for order {order} at argument {argument} did not converge within {terms} terms")]
    SeriesNonConvergence {
        order: u32,
        argument: String,
        terms: usize,
    },

    #[error("root scan exhausted at x = {last_abscissa} after finding {found} of {requested} roots")]
    RootSearch {
        last_abscissa: f64,
        found: usize,
        requested: usize,
    },

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("degenerate active force: {0}")]
    DegenerateForce(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("exponent {exponent} out of range in concentration profile")]
    OutOfRange { exponent: f64 },

    #[error("speed V = {speed} is at or beyond the maximal admissible speed (tilt never reaches +1)")]
    SpeedTooLarge { speed: f64 },

    #[error("tip search failed: {0}")]
    TipNotFound(String),

    #[error("invalid profile: {0}")]
    ProfileInvalid(String),

    #[error("ODE integration failed: {0}")]
    Integration(String),

    #[error("internal inconsistency: {0}")]
    Inconsistency(String),

    #[error("fixed-point iteration for c1 did not converge after {iterations} iterations (last iterates {previous}, {last})")]
    FixedPointDivergence {
        iterations: usize,
        previous: f64,
        last: f64,
    },

    #[error("no traveling wave: G(V) has no sign change over {} scanned speeds", scan.len())]
    NoTravelingWave { scan: Vec<GSample> },

    #[error("root refinement failed: {0}")]
    RootRefinement(String),

    #[error("leading-eigenvalue expansion invalid for kappa_act = {kappa_act} (requires kappa_act < 3)")]
    ExpansionInvalid { kappa_act: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

/// One point of the closure-functional scan performed while bracketing the
/// traveling-wave speed. `g` is `None` when the speed exceeded the admissible
/// range (G is then treated as +infinity).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GSample {
    pub v: f64,
    pub g: Option<f64>,
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
