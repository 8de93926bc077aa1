//! Hyper-power (Schulz) preconditioner sequences for the Kronecker-structured
//! saddle-point system of an isogeometric, divergence-conforming Stokes
//! discretization on the unit cube.
//!
//! Module map:
//! - [`tensorkron`]: Kronecker products, generalized Kronecker sums, fast diagonalization
//! - [`spline`]: univariate B-spline bases and matrices
//! - [`stokes`]: the saddle-point system and the lid-driven cavity data
//! - [`precond`]: initial block preconditioner and the hyper-power sequences
//! - [`krylov`]: preconditioned MINRES
//! - [`spectral`]: dense spectra at desk scale and the theory checks

pub mod dense;
pub mod error;
pub mod krylov;
pub mod operator;
pub mod precond;
pub mod spectral;
pub mod spline;
pub mod stokes;
pub mod tensorkron;

pub use dense::{Cholesky, DenseMatrix, SymmetricEigen};
pub use error::{Error, Result};
pub use operator::{LinearOperator, OpHandle};

/// Library version, echoed into every benchmark artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
