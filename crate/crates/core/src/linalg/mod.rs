//! Low-rank and diagonal linear algebra, plus the dense direct path used by
//! the kernel baseline.

mod dense;
mod lowrank;
mod woodbury;

pub use dense::{dense_solve, Cholesky, DenseSymmetric, Lu, SYMMETRY_TOL};
pub use lowrank::{degree_diagonal, DiagonalMatrix, LowRankFactor, SPARSE_DENSITY_THRESHOLD};
pub use woodbury::{woodbury_solve, WoodburySolver};
