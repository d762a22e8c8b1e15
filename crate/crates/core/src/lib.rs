//! # hilbert-ops
//!
//! Learning as operator estimation on discretized Hilbert spaces.
//!
//! Functions on `[0, 1)` are represented by uniform samples with a left-Riemann
//! inner product, which makes sampled complex exponentials and the dyadic Haar
//! system exactly orthonormal. On top of that the crate provides:
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`function_space`] | inner products, projections, basis analysis/synthesis, biorthogonal reconstruction |
//! | [`kernels`] | kernel evaluation, Gram matrices, kernel ridge regression |
//! | [`spectral`] | unitary DFT, spectral multipliers, convolution, learnable soft-thresholding |
//! | [`scattering`] | 1-D wavelet scattering up to order 2 |
//! | [`operator_learning`] | Hilbert–Schmidt ridge regression of operators, EDMD/Koopman |
//! | [`reasoning`] | relation operators, composition, relational kernels, analogy |
//! | [`sparse_recovery`] | soft shrinkage, ISTA/FISTA, debiasing, Gaussian sensing |
//!
//! Every routine is a pure function of its inputs; fitted models are immutable.

pub mod error;
pub mod function_space;
pub mod kernels;
pub(crate) mod linalg;
pub mod operator_learning;
pub mod reasoning;
pub mod scattering;
pub mod sparse_recovery;
pub mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64;
