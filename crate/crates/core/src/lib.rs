//! Numerical laboratory for periodic homogenization of elliptic systems and
//! their complex-shifted resolvents.

pub mod cell;
pub mod domain;
pub mod error;
pub mod fem;
pub mod fit;
pub mod green;
pub mod harness;
pub mod linalg;
pub mod spectral;
pub mod tensor;

pub use error::{Error, Result};
