use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("level {level} is outside the lattice [{first}, {last}]")]
    LevelOutOfRange { level: i64, first: i64, last: i64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("step size too coarse: dt * max(|j|, lambda) = {product:.3e} (must be < {limit})")]
    StepTooCoarse { product: f64, limit: f64 },

    #[error("band leakage {fraction:.3e} of total mass exceeds {limit:.1e}; enlarge the band or window")]
    BandLeakage { fraction: f64, limit: f64 },

    #[error("non-finite value in {what} at step {step}")]
    NonFinite { what: &'static str, step: usize },

    #[error("thermal sum not converged: {0}")]
    TruncationNotConverged(String),
}

impl Error {
    /// True for failures of a numerical guard (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::BandLeakage { .. } | Error::NonFinite { .. } | Error::TruncationNotConverged(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
