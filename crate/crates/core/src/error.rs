use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A linear system could not be solved. `condition` is the ratio of the
    /// largest to the smallest pivot magnitude seen by the factorization.
    #[error("singular matrix in {context} (condition estimate {condition:e})")]
    Singular {
        context: &'static str,
        condition: f64,
    },

    /// Gauss-Seidel sweeps exhausted. `residuals` holds the last per-contact
    /// impulse change.
    #[error("contact solver did not converge after {iterations} sweeps (max impulse change {max_change:e})")]
    NonConvergence {
        iterations: usize,
        max_change: f64,
        residuals: Vec<f64>,
    },

    #[error("smoothed oracle failed: {0}")]
    OracleFailure(String),

    #[error("buffer: {0}")]
    Buffer(String),

    #[error("identification: {0}")]
    Identification(String),

    #[error("scenario failed at step {step}: {source}")]
    Scenario {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}
