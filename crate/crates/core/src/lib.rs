//! Contextual-bandit benchmarking with feel-good Thompson sampling.
//!
//! The crate is layered bottom-up: [`design`] keeps ridge statistics,
//! [`env`] generates rounds, [`likelihoods`] scores parameters against the
//! history, [`samplers`] draw approximate posterior samples, [`policies`]
//! choose arms, and [`harness`] runs seeded experiments and writes results.

pub mod config;
pub mod design;
pub mod env;
pub mod error;
pub mod harness;
pub mod likelihoods;
pub mod linalg;
pub mod policies;
pub mod rng;
pub mod samplers;

pub use error::{Error, Result};
