use crate::C64;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix file line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("singular system {what} at λ = {at}")]
    Singular { what: &'static str, at: C64 },

    #[error("pencil λ² + λB + A is singular at λ = {lambda}")]
    SingularPencil { lambda: C64 },

    #[error("matrix is not diagonalizable (eigenvector condition number {cond:e})")]
    NonDiagonalizable { cond: f64 },

    #[error("eigenvalue {eigenvalue} lies on the branch cut of the principal power")]
    BranchCut { eigenvalue: C64 },

    #[error("operator is not sectorial of angle {angle}: spectral point {point} outside the sector")]
    NotSectorial { angle: f64, point: C64 },

    #[error("unsupported parameters: {0}")]
    Unsupported(String),

    #[error("compatibility condition violated: ‖f(0) − A u0 − B u1‖ = {defect:e} exceeds {bound:e}")]
    Compatibility { defect: f64, bound: f64 },

    #[error("kernel overflow: Re λ·T = {growth} at λ = {lambda}")]
    Overflow { lambda: C64, growth: f64 },

    #[error("norm of the data vanishes; ratio undefined")]
    ZeroNorm,

    #[error("eigenvalue iteration did not converge")]
    NoConvergence,
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
