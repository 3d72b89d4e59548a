//! Dense and sparse matrix primitives, the leading singular triple by power
//! iteration, and small Jacobi-based decompositions used as test oracles and
//! for spectral diagnostics.

mod jacobi;
mod mat;
mod power;

pub use jacobi::{
    full_svd, nuclear_norm, second_largest_abs_eigenvalue, symmetric_eigenvalues, Svd,
    ORACLE_MAX_DIM,
};
pub use mat::{dot, norm2, normalize, Mat, SparseVec};
pub use power::{leading_singular_triple, power_iteration, PowerOpts, SingularTriple};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("duplicate sparse index {0}")]
    DuplicateIndex(usize),
    #[error("non-finite entry")]
    NonFinite,
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("power iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("Jacobi sweeps did not converge after {sweeps} sweeps")]
    JacobiNoConvergence { sweeps: usize },
    #[error("matrix {rows}x{cols} exceeds the dense oracle cap of {cap}")]
    OracleTooLarge { rows: usize, cols: usize, cap: usize },
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
}
