//! Envelope-guided regularization (EgReg) and related principal-component
//! regression methods for multivariate linear regression.
//!
//! - [`matrix`]: datasets, thin SVD, cross-covariances, subspace distance
//! - [`envelope`]: envelope scores and NIECE subspace estimation
//! - [`estimators`]: PCR, ridge, NIECE, EgReg, SIMPLS and prediction
//! - [`risk`]: conditional finite-sample prediction risks
//! - [`limits`]: limiting risks under proportional asymptotics
//! - [`sim`]: data generators, cross-validation and simulation studies

pub mod envelope;
pub mod error;
pub mod estimators;
pub mod limits;
pub mod matrix;
pub mod risk;
pub mod sim;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
