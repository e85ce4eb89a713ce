use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A distribution or system parameter is out of range.
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    /// Scheme parameters (k, ell) violate the scheme's invariants.
    #[error("invalid scheme: {0}")]
    InvalidScheme(String),

    /// The multi-message level solver placed no subtasks on the first level.
    #[error("level solver returned k1 = 0 (alpha_1 = {alpha_1}, n = {n})")]
    DegenerateLevels { alpha_1: f64, n: usize },

    /// The requested level sum exceeds what any alpha_1 < 1 can reach.
    #[error("level split infeasible: target sum {target} >= supremum {supremum}")]
    Infeasible { target: f64, supremum: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("argument {x} outside the domain [-1/e, 0) of the lower Lambert W branch")]
    DomainError { x: f64 },

    #[error("level counts cannot sum to k = {k} (floors sum to {floor_sum}, {levels} levels)")]
    InconsistentK {
        k: usize,
        floor_sum: usize,
        levels: usize,
    },

    #[error("need at least {batches} cycles for batch means, got {cycles}")]
    InsufficientCycles { cycles: usize, batches: usize },

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    /// Numerical failures (as opposed to bad input) map to a distinct CLI exit code.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateLevels { .. } | Error::Infeasible { .. } | Error::NoConvergence { .. }
        )
    }
}
