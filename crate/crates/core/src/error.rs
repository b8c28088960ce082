use thiserror::Error;

use crate::sdp::SolveStatus;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate space label `{0}`")]
    DuplicateLabel(String),

    #[error("unknown space label `{0}`")]
    UnknownLabel(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("new ordering is not a permutation of the operator's spaces")]
    NotAPermutation,

    #[error("Kraus completeness violated (residual {0:.3e})")]
    NotTracePreserving(f64),

    #[error("operator is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPositive(f64),

    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("problem exceeds the dense size cap: {0}")]
    CapExceeded(String),

    #[error("SDP solver finished with status {status:?}: {context}")]
    Solver { status: SolveStatus, context: String },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("gauge alignment flagged grid points {0:?}")]
    FlaggedPoints(Vec<usize>),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
