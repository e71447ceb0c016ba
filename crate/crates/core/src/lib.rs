//! Maximum-likelihood estimation of the correlation matrix of Gaussian and
//! Student's t copulas.
//!
//! The main entry point is [`estimate::fit_inverse_gradient`], which maximizes
//! the log-likelihood composed with the covariance-to-correlation projection
//! by moving along the inverse-gradient direction with an adaptive step. The
//! crate also ships the approximate fixed-point estimator it is compared
//! against, copula samplers, a random correlation matrix generator and a
//! small experiment harness.

pub mod copula;
pub mod error;
pub mod estimate;
pub mod experiment;
pub mod linalg;
pub mod margins;
pub mod testgen;

pub use copula::{CopulaModel, CorrelationMatrix, PseudoSample, TransformedSample};
pub use error::{Error, Result};
pub use estimate::{FitResult, FitStatus, StepConfig};
pub use linalg::SymMatrix;
pub use margins::Dof;
