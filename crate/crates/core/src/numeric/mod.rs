//! Dense and sparse kernels, Adam, seeded random streams and the
//! finite-difference gradient oracle.

mod adam;
mod dense;
mod gradcheck;
mod rng;
mod sparse;

pub use adam::AdamState;
pub use dense::{dot, squared_distance, DenseMatrix};
pub use gradcheck::{finite_diff_check, max_relative_error, numerical_gradient, RELATIVE_ERROR_FLOOR};
pub use rng::RngStream;
pub use sparse::{spmm, CsrMatrix};
