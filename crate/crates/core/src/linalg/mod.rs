//! Dense linear algebra primitives used by the erasers and diagnostics.
//!
//! Everything here computes in `f64` with a fixed summation order, so results
//! are reproducible bit for bit across runs.

mod basis;
mod decomp;
mod matrix;
mod metrics;

pub use basis::{complement_projector, orthonormal_basis, OrthonormalBasis};
pub use decomp::{
    jacobi_svd, psd_inv_sqrt, singular_values, sym_eig, ColumnSvd, SymEig, MAX_JACOBI_SWEEPS,
};
pub use matrix::{dot, norm, Matrix};
pub use metrics::{default_rank_tol, matrix_rank, mean_row_cosine, CosineSummary, RANK_TOL_BASE};
