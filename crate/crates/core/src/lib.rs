//! Multilevel multimodal fusion of depth and inertial sensor data for human
//! action recognition.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`]: dense matrices, covariance assembly, Jacobi eigensolver,
//!   whitening and bicubic resampling.
//! * [`imaging`]: signal images, sequential front-view images, Prewitt
//!   filtering, green/magenta composites and signal augmentation.
//! * [`cnn`]: small convolutional feature extractors with SGD-momentum
//!   training and layer-tap feature extraction.
//! * [`ccf`]: canonical correlation analysis and the two feature-level fusion
//!   operators.
//! * [`classify`]: one-vs-all linear SVM, softmax score normalisation and
//!   maximum decision fusion.
//! * [`pipeline`]: datasets, the evaluation protocol and the three fusion
//!   frameworks.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ccf;
pub mod classify;
pub mod cnn;
mod error;
pub mod imaging;
pub(crate) mod io;
pub mod numerics;
pub mod pipeline;

pub use error::{Error, Result};
