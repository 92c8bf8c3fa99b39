//! Gradient-free Stein variational sampling and goodness-of-fit testing for
//! discrete distributions through an exact continuous parameterization.

pub mod baselines;
pub mod bnn;
pub mod error;
pub mod experiment;
pub mod gof;
pub mod models;
pub mod numkit;
pub mod sampler;
pub mod transform;

pub use error::{Error, Result};
