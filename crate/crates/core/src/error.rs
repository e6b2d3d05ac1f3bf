//! Error type shared by every operation in the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of the analysis and reduction operations.
///
/// Variants map one-to-one onto the CLI exit codes documented on
/// [`Error::exit_code`]: schema/parse problems exit 2, an irregular pencil
/// exits 3, a purely algebraic system exits 4, a missing fast part exits 5,
/// a range mismatch between switched modes exits 6, and a failed trajectory
/// check exits 7. Everything else is an internal error (exit 1).
#[derive(Debug, Error)]
pub enum Error {
    /// A matrix entry was NaN or infinite.
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    /// Operand shapes are incompatible.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An argument violates a documented precondition (not a shape problem).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A matrix that must have full column rank does not.
    #[error("rank deficiency: {rows}x{cols} matrix has rank {rank}")]
    Rank {
        rows: usize,
        cols: usize,
        rank: usize,
    },

    /// A linear solve hit a singular (or numerically singular) matrix.
    #[error("singular matrix in linear solve (condition estimate {cond:.3e})")]
    Singular { cond: f64 },

    /// An iterative kernel (SVD, Schur, exponential) failed to converge or
    /// overflowed.
    #[error("numerical computation failed: {0}")]
    Computation(String),

    /// No shift candidate made the pencil nonsingular: the pencil is singular
    /// (det(sE - A) vanishes identically to working precision).
    #[error("pencil is not regular: A - lambda*E singular for all {tried} trial shifts")]
    NotRegular { tried: usize },

    /// The shifted matrix is nilpotent: the system has no dynamic part and
    /// x = 0 is the only unforced solution, so there is nothing to reduce.
    #[error("purely algebraic system: rank(F^{k}) = 0, consistency space is trivial")]
    PureSystem { k: usize },

    /// E is nonsingular (or F is), so there is no fast/algebraic subsystem.
    #[error("no fast subsystem: {0}")]
    NoFastPart(String),

    /// A user-supplied basis does not match the subspace it must span, or a
    /// basis-derived matrix that the theory requires to be nonsingular is not.
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    /// The reduced state recursion needs a nilpotent matrix and did not get one.
    #[error("matrix is not nilpotent: ||N^{power}|| = {norm:.3e}")]
    NotNilpotent { power: usize, norm: f64 },

    /// Trajectory or identity checks need an input matrix the system lacks.
    #[error("system has no input matrix: {0}")]
    NoInput(String),

    /// A stored reduction's index is incompatible with the requested check.
    #[error("reduction has index {index}; operation requires index 0")]
    Index { index: usize },

    /// Switched modes do not share the range of their compressed powers.
    #[error(
        "modes {mode_a} and {mode_b} do not share a common range: \
         principal angle {angle:.3e} exceeds {angle_tol:.3e}"
    )]
    CommonRange {
        mode_a: usize,
        mode_b: usize,
        angle: f64,
        angle_tol: f64,
    },

    /// Input file is not valid JSON.
    #[error("parse error: {0}")]
    Parse(String),

    /// Input file is valid JSON but violates the schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// Filesystem problem.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code the CLI maps this error to.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Parse(_) | Error::Schema(_) | Error::Io(_) => 2,
            Error::NotRegular { .. } => 3,
            Error::PureSystem { .. } => 4,
            Error::NoFastPart(_) => 5,
            Error::CommonRange { .. } => 6,
            _ => 1,
        }
    }
}
