use thiserror::Error;

/// Errors for the non-solver operations. Solver-specific failures carry
/// iterates and live in [`crate::solver::SolveError`].
#[derive(Debug, Error)]
pub enum Error {
    /// Caller-supplied data violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// Input is syntactically fine but outside the mathematical domain
    /// of the operation (e.g. a pole of a rational expression).
    #[error("domain error: {0}")]
    Domain(String),
    /// Should-not-happen conditions: numerical assumptions broken, IO on
    /// files we just wrote, and similar.
    #[error("internal error: {0}")]
    Internal(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Internal(format!("io: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

/// Rejects non-finite entries early so NaNs cannot propagate into reports.
pub(crate) fn check_finite(what: &str, xs: &[f64]) -> Result<()> {
    if let Some(bad) = xs.iter().find(|x| !x.is_finite()) {
        return Err(invalid(format!("{what} contains a non-finite entry {bad}")));
    }
    Ok(())
}
