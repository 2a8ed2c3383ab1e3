//! Fully symmetric PCA learning rules on the covariance matrix.
//!
//! The crate integrates matrix learning rules whose columns all perform the
//! same computation (N2S and its modified variant M2S with weight factor α,
//! plus reference rules), measures convergence towards the principal
//! eigenvectors and checks the fixed-point and stability structure of the
//! modified rule.
//!
//! * [`linalg`]: dense matrices, seeded sampling, symmetric factorizations
//! * [`model`]: covariance models with a known spectrum
//! * [`rules`]: objectives, gradient and learning-rule right-hand sides
//! * [`dynamics`]: Euler integration with back-projection
//! * [`metrics`]: orthonormality and projection errors
//! * [`analysis`]: fixed-point constraints, `det{D′_α}` sweep, stability probes
//! * [`verify`]: self-check suites run by `symflow verify`
//! * [`cli`]: the command-line front end

pub mod analysis;
pub mod cli;
pub mod dynamics;
mod error;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod rules;
pub mod verify;

pub use error::{Error, Result};
