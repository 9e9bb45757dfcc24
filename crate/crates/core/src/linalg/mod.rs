//! Small self-contained linear algebra over [`Real`](crate::Real): dense
//! column-major matrices, LU, Householder QR, a Jacobi SVD, CSR sparse
//! matrices and a banded Cholesky factorization.

mod banded;
pub(crate) mod dense;
mod sparse;
mod svd;

pub use banded::BandedCholesky;
pub use dense::{Lu, Matrix};
pub use sparse::{CsrMatrix, TripletBuilder};
pub use svd::{householder_qr, thin_svd, ThinSvd};
