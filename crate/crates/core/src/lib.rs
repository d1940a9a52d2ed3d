//! Probabilistic programs with internal randomness, their gradient
//! estimators, and gradient-based MCMC samplers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ad;
pub mod dist;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod model;
pub mod models;
pub mod oracles;
pub mod rng;
pub mod samplers;

pub use error::{Error, Result};
