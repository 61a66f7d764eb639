//! Ridge-type covariance and precision estimation with condition-number
//! diagnostics for choosing the penalty.
//!
//! The crate covers the full workflow for high-dimensional (p close to or
//! above n) covariance estimation:
//!
//! * [`ingest`] reads numeric tables and forms covariance or correlation
//!   matrices;
//! * [`spectra`] supplies the symmetric storage type and the eigenvalue
//!   machinery everything else is built on;
//! * [`estimators`] implements three ridge-type estimators (two archetypal
//!   forms and a rotation-equivariant alternative) plus shrinkage targets;
//! * [`condpath`] traces the spectral or one-norm condition number of an
//!   estimator over a log-equidistant penalty grid and locates the knee
//!   where the path flattens, giving a minimal defensible penalty;
//! * [`selection`] refines that choice by cross-validated Gaussian
//!   log-likelihood, minimized over the well-conditioned interval.
//!
//! All matrices are dense and symmetric, stored as packed lower triangles.
//! The numerical kernels are self-contained: a cyclic Jacobi eigensolver,
//! closed-form eigenvalue maps for the estimators, and a Brent scalar
//! minimizer for the likelihood search.

pub mod condpath;
pub mod error;
pub mod estimators;
pub mod ingest;
pub mod selection;
pub mod spectra;

pub use error::{Error, Result};
