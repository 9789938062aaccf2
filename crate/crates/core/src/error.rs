//! Error type shared across the library.

use thiserror::Error;

/// Everything that can go wrong while building or evaluating stability data.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// The exponent pair violates `p >= q`, so no conjugate exponent exists.
    #[error("exponent precedence violated: p = {p} < q = {q}")]
    Precedence { p: String, q: String },

    /// A finite-exponent norm was requested for data whose trailing trend
    /// does not decay and which carries no analytic tail.
    #[error("norm divergent or untrustworthy: {0}")]
    DivergentNorm(String),

    /// A matrix that must be inverted is singular within tolerance.
    #[error("singular matrix: |det| = {det:.3e} <= tol = {tol:.3e}")]
    SingularMatrix { det: f64, tol: f64 },

    /// No exponential dichotomy fits the sampled evolution data.
    #[error("no exponential dichotomy fits the samples: {0}")]
    NoDichotomy(String),

    /// The Lipschitz constant of the nonlinearity is too large relative to
    /// the dichotomy data; the fixed-point argument has no room.
    #[error("smallness condition violated: c = {c} must stay below {limit} (kind {kind})")]
    SmallnessViolation { c: f64, limit: f64, kind: String },

    /// An operation that requires all spectrum in the open right half plane
    /// was called with a matrix that is not an expansion.
    #[error("not an expansion: {0}")]
    NotExpansion(String),

    /// Picard iteration exhausted its iteration budget.
    #[error("no convergence after {iterations} iterations (last update {last_update:.3e}, threshold {threshold:.3e})")]
    NoConvergence {
        iterations: usize,
        last_update: f64,
        threshold: f64,
    },

    /// The solver produced a solution whose certified bound fails to hold.
    /// This is a hard error: the output would be unsound.
    #[error("certificate failure: deviation {deviation:.6e} exceeds L*eps = {bound:.6e} + tol")]
    CertificateFailure { deviation: f64, bound: f64 },

    /// A structural precondition (projection property, grid shape,
    /// parameter range, ...) does not hold.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The requested combination of system and operation is out of scope.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
