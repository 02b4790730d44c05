use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e} below -1e-8")]
    NotPsd { eigenvalue: f64 },

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal {off_diagonal:e})")]
    NoConvergence { sweeps: usize, off_diagonal: f64 },

    #[error("argument out of domain: {0}")]
    OutOfDomain(String),

    #[error("resource budget exceeded: {needed} pairs requested, limit {limit}")]
    BudgetExceeded { needed: usize, limit: usize },

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("at m = {m}: {source}")]
    AtDimension {
        m: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Strips any [`Error::AtDimension`] wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtDimension { source, .. } => source.root(),
            other => other,
        }
    }
}
