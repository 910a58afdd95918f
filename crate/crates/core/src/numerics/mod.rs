//! Random streams and the small set of dense linear-algebra kernels used
//! throughout the crate.

mod linalg;
mod rng;

pub use linalg::{
    cholesky, gram_eigvals, min_norm_interpolate, pseudo_inverse, solve_spd, sym_eigvals,
    CholeskyFactor, PIVOT_TOLERANCE, PSEUDO_INVERSE_RCOND, SYMMETRY_TOLERANCE,
};
pub use rng::{gaussian_matrix, gaussian_vector, Rng};

/// Dense real matrix (column-major storage).
pub type Matrix = nalgebra::DMatrix<f64>;
/// Dense real column vector.
pub type Vector = nalgebra::DVector<f64>;
