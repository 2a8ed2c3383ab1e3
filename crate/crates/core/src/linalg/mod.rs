//! Small dense linear algebra: matrix type, seeded sampling and symmetric
//! factorizations.

mod decomp;
mod matrix;
mod random;

pub use decomp::{
    det, orthogonal_complement, sym_eigen, sym_inv_sqrt, thin_qr, SymEigen, DEFAULT_EIGEN_TOL,
    MAX_SWEEPS, MIN_PD_EIGENVALUE, SYMMETRY_TOL,
};
pub use matrix::Matrix;
pub use random::{random_orthogonal, random_stiefel, Rng};
