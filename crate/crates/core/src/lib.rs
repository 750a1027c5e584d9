//! Bayesian linear regression testbed for function-space variational
//! inference.
//!
//! The linear model has a closed-form posterior, so approximate inference
//! methods that only ever see finite marginals of the predictive process can
//! be scored by their KL divergence to the exact answer.

pub mod bench;
pub mod blr;
pub mod error;
pub mod features;
pub mod gaussian;
pub mod gradcheck;
pub mod io;
pub mod linalg;
pub mod optimize;
pub mod ssge;
pub mod theory;
pub mod variational;

pub use error::{Error, Result};
