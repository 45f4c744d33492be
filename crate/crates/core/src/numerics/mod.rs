//! Dense real-matrix primitives shared by the other modules.

mod covariance;
mod eigen;
mod matrix;
mod resample;

pub use covariance::{covariances, CovarianceSet, Ridge};
pub use eigen::{inv_sqrt, sym_eig, EigenDecomposition};
pub(crate) use matrix::dot;
pub use matrix::Matrix;
pub use resample::{bicubic_resize, BICUBIC_A};
