use thiserror::Error;

/// Errors raised by the coarse-switching library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A coverage value or parameter lies outside its admissible domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The adaptive integrator could not make progress.
    #[error("integration failed at t = {t}: step size underflow (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    /// The integrator hit its step budget before reaching the requested time.
    #[error("integration failed at t = {t}: exceeded {max_steps} steps")]
    TooManySteps { t: f64, max_steps: usize },

    #[error("no saddle steady state at this parameter point ({found} steady states)")]
    NoSaddle { found: usize },

    #[error("steady state at {state:?} is marginally stable; refusing to classify")]
    MarginalStability { state: Vec<f64> },

    #[error("operation requires a {expected}-dimensional model, got {found}")]
    UnsupportedDimension { expected: usize, found: usize },

    #[error("horizon {horizon} is not an integer multiple of interval {interval}")]
    IncompatibleHorizon { horizon: f64, interval: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },
}

impl Error {
    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::StepUnderflow { .. } | Error::TooManySteps { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
