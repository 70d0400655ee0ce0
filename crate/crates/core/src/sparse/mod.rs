//! Sparse matrices and the linear solvers used by every module.

pub mod csr;
pub mod eig;
pub mod lu;

pub use csr::{axpy, dot, norm, CsrMatrix, Triplets};
pub use eig::{lanczos, EigPair, LanczosOptions, Which};
pub use lu::{DofGroups, LuStats, SparseLu};
