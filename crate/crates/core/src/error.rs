use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("solver failure in {solver}: {message}")]
    Solver { solver: &'static str, message: String },

    /// The barrier path lost strict feasibility; carries the last strictly
    /// feasible lifted vector `u`.
    #[error("barrier method failed: {message}")]
    Barrier { message: String, last_feasible: Vec<f64> },

    /// An alternating-optimization run stopped on a subproblem failure;
    /// `partial` holds the iterations completed before it.
    #[error("optimization aborted at iteration {iteration}: {source}")]
    Aborted {
        iteration: usize,
        source: Box<Error>,
        partial: Box<crate::driver::IterationTrace>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of a numerical solver, as opposed to bad input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::Solver { .. } | Error::Barrier { .. } | Error::Aborted { .. }
        )
    }

    pub(crate) fn solver(solver: &'static str, message: impl Into<String>) -> Self {
        Error::Solver {
            solver,
            message: message.into(),
        }
    }
}
