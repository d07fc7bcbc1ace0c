//! Numerical toolkit for Hardy-type spaces of the Gauss measure.
//!
//! The crate verifies, at desk scale, the kernel formulas and the
//! boundedness criteria that separate the atomic Hardy space `H^1(gamma)`
//! from its Goldberg-type enlargement `h^1(gamma)`:
//!
//! - [`gauss_geometry`]: admissible balls, Gauss measure of sets, local
//!   doubling, boundary shells and the `rho'` metric.
//! - [`ou_spectral`]: Hermite calculus for the Ornstein-Uhlenbeck operator
//!   and the Mehler kernel.
//! - [`impow_kernel`]: kernels of the imaginary powers `(rI + L)^{iu}`.
//! - [`singular_estimators`]: Hörmander constants, mass at infinity,
//!   atom images and the divergence scan.
//! - [`hardy_atoms`]: atoms, BMO oscillation and atomic norm bounds.
//! - [`tree_analysis`]: radial kernels on homogeneous trees.

// `!(x > 0.0)` rejects NaN on purpose; quadrature nodes are kept at full
// published precision
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod gauss_geometry;
pub mod hardy_atoms;
pub mod impow_kernel;
pub mod ou_spectral;
pub mod parallel;
pub mod quadrature;
pub mod singular_estimators;
pub mod special;
pub mod tree_analysis;

use num_complex::Complex64;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("convergence failure: {message} (best estimate {best}, error {error:e})")]
    Convergence {
        message: String,
        best: Complex64,
        error: f64,
    },
}

impl Error {
    pub(crate) fn convergence(message: impl Into<String>, best: Complex64, error: f64) -> Self {
        Error::Convergence {
            message: message.into(),
            best,
            error,
        }
    }
}
