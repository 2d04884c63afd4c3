use thiserror::Error;

/// Errors raised by the channel generators, designers and simulators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate design at iteration {iteration}: {what}")]
    Degenerate { iteration: usize, what: String },

    #[error("block diagonalization infeasible for {user}: null space of the other users' channels is empty")]
    InfeasibleBd { user: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures that originate in the numerics rather than in the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical(_) | Error::Degenerate { .. } | Error::InfeasibleBd { .. }
        )
    }
}
