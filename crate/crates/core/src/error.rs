//! Crate-wide error type.

/// Errors surfaced by the library. Configuration and parameter errors are
/// distinguished from runtime diagnostics (overflow, broken monotonicity) so
/// the CLI can map them to different exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A mathematical precondition (e.g. a weight-sandwich admissibility
    /// formula) does not hold for the requested parameters.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// The solution exceeded the configured sup-norm ceiling.
    #[error("solver overflow at t = {t}: sup-norm {sup:.3e} exceeds ceiling {ceiling:.3e}")]
    Overflow { t: f64, sup: f64, ceiling: f64 },

    /// Regularization levels failed to decrease monotonically.
    #[error(
        "regularization ladder not monotone at level m = {level}: \
         max pointwise increase {violation:.3e} exceeds tolerance {tol:.3e}"
    )]
    NonMonotoneLadder {
        level: u32,
        violation: f64,
        tol: f64,
    },

    /// Malformed configuration file or inconsistent experiment description.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors that indicate a bad configuration rather than a
    /// failed numerical check.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::InvalidParameter(_) | Error::Precondition(_)
        )
    }
}
