//! Sparse matrices and linear solvers.
//!
//! Assembled operators are stored in compressed-row form. Matrices that come
//! from the same mesh share one [`CsrPattern`] through an `Arc`, which makes
//! linear combinations a single pass over the value arrays.

mod dense;
mod ilu;
mod krylov;
mod sparse;

pub use dense::{lu_solve, DenseMatrix};
pub use ilu::Ilu0;
pub use krylov::{solve, Preconditioner, SolveReport, SolverOptions};
pub use sparse::{add_scaled, spmv, CsrMatrix, CsrPattern};

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm2(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}
