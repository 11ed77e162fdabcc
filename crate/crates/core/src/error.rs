use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("dimension {0} exceeds the dense cap of {cap}", cap = crate::tol::MAX_DIM)]
    DimensionCap(usize),

    #[error("operator is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("operator is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("operator is not an orthogonal projector (max deviation {0:.3e})")]
    NotProjector(f64),

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("eigensolver did not converge")]
    NoConvergence,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid witness: {0}")]
    InvalidWitness(String),

    #[error("no bound term is applicable: {0}")]
    NoApplicableTerm(String),

    #[error("non-finite objective value at restart {restart}")]
    NonFiniteObjective { restart: usize },

    #[error("no succeeding time in [{lo}, {hi}]; best fidelity {best_fidelity:.6}")]
    SearchExhausted {
        lo: f64,
        hi: f64,
        best_fidelity: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
