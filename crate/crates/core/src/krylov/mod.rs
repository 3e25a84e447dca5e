//! Sparse linear algebra: CSR storage, Krylov solvers, preconditioners,
//! a dense direct oracle and MatrixMarket I/O.

mod csr;
mod dense;
mod mtx;
mod precond;
mod solvers;

pub use csr::{sparse_triple_product, CsrMatrix};
pub use dense::{dense_solve, dense_solve_capped, DenseLu, DenseMatrix, DENSE_SIZE_CAP};
pub use mtx::{read_matrix_market, write_matrix_market};
pub use precond::{
    make_preconditioner, BlockJacobi, IdentityPreconditioner, Jacobi, Preconditioner,
    PreconditionerKind, PreconditionerTarget, Simple, Ssor,
};
pub use solvers::{cg, gcr, SolveReport, StopRule};

/// Default restart length for [`gcr`].
pub const GCR_RESTART: usize = 50;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("{op}: dimension mismatch (expected {expected:?}, found {found:?})")]
    DimensionMismatch {
        op: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("malformed matrix: {0}")]
    Structure(String),
    #[error("zero diagonal entry in row {row}")]
    ZeroDiagonal { row: usize },
    #[error("matrix is singular to working precision (pivot {index})")]
    Singular { index: usize },
    #[error("non-positive curvature {curvature:e} at CG iteration {iteration}: operator is not SPD")]
    Indefinite { iteration: usize, curvature: f64 },
    #[error("preconditioner is not positive definite (iteration {iteration})")]
    PreconditionerNotSpd { iteration: usize },
    #[error("dense solve refused: order {n} exceeds cap {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("MatrixMarket parse error: {0}")]
    Parse(String),
}
