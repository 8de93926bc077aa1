//! Lid-driven cavity benchmark: MINRES solves with hyper-power preconditioners,
//! matvec scaling, dense spectra and the solution-time model.

pub mod config;
pub mod contour;
pub mod error;
pub mod output;
pub mod scaling;
pub mod solve;
pub mod spectra;

pub use config::RunConfig;
pub use error::{BenchError, Result};
pub use solve::BenchRecord;
