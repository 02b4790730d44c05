//! Numerical laboratory for the principal factor approximation (PFA) of
//! dependent Gaussian test statistics.
//!
//! The crate is organised bottom-up:
//!
//! - [`matlin`]: dense symmetric linear algebra (parallel cyclic Jacobi,
//!   Householder reflections, random orthogonal blocks).
//! - [`constructions`]: the four explicit covariance families whose PFA
//!   regimes differ (block-diagonal, dense reflection, bounded tail, mixed).
//! - [`pfa`]: factor/residual split, `a_{i,m}` scale factors, k-selection
//!   and the weak-dependence side conditions.
//! - [`gaussian`]: normal cdf/quantile, conditional rejection probabilities
//!   and bivariate rectangle probabilities for residual pairs.
//! - [`slln`]: sampling, exact conditional variance of the normalized
//!   rejection count, dimension sweeps and summability checks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constructions;
pub mod error;
pub mod gaussian;
pub mod matlin;
pub mod pfa;
pub mod seed;
pub mod slln;
pub mod sum;

pub use error::{Error, Result};
