//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("metric determinant not positive at grid point {point} (det = {det:.3e})")]
    NonPositiveMetric { point: usize, det: f64 },

    #[error("matrix field not positive definite at grid point {point} (min eigenvalue {min_eig:.3e})")]
    NotPositive { point: usize, min_eig: f64 },

    #[error("tensor field not Nakano positive (min eigenvalue {min_eig:.3e} at grid point {point})")]
    NotNakanoPositive { point: usize, min_eig: f64 },

    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("Fourier mode {mode:?} is not resolved on an N = {n_axis} grid (need |k| <= N/4)")]
    UnresolvedMode { mode: Vec<i64>, n_axis: usize },

    #[error("imaginary residue {0:.3e} in a contraction that must be real")]
    ImaginaryLeak(f64),

    #[error("linear solver did not converge after {iterations} iterations (relative residual {achieved:.3e})")]
    NoConvergence { iterations: usize, achieved: f64 },

    #[error("Newton step at t = {t} admits no damping factor (residual sup {residual:.3e})")]
    NewtonStall { t: f64, residual: f64 },

    #[error("continuation hit the step floor at t = {t_reached:.6}")]
    PathFailure { t_reached: f64 },

    #[error("state left the positivity cone (min eigenvalue {min_eig:.3e})")]
    OutsideCone { min_eig: f64 },

    #[error("dense Jacobian is singular")]
    SingularJacobian,

    #[error("operation requires bundle rank 1, got rank {0}")]
    RankMismatch(usize),

    #[error("scenario schema error at `{key}`: {reason}")]
    Schema { key: String, reason: String },

    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn schema(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Schema {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
