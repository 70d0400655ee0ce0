//! Finite-element spaces, assembly kernels and block solves.

pub mod assemble;
pub mod basis;
pub mod oracles;
pub mod quadrature;
pub mod saddle;
pub mod space;

pub use assemble::{assemble_form, assemble_on, worker_count, FaceSet, FormKind};
pub use oracles::{gaffney_ratio, ibp_residual, IbpOracle};
pub use saddle::{solve_saddle, BlockBuilder, SaddleFactor, SaddleSolution, SaddleSystem};
pub use space::{block_groups, build_space, Constraint, Family, MeshRef, NodeDofs, Space};

#[cfg(test)]
mod tests;
