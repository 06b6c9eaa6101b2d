//! Sum-rate capacity analysis for single-hop interference networks.
//!
//! The crate models networks with arbitrary message topologies, checks
//! less-noisy and degradedness orderings between receivers, reduces message
//! sets, and builds, evaluates and maximizes achievable sum-rates and
//! sum-rate outer bounds for discrete and Gaussian channels.

pub mod error;
pub mod fixtures;
pub mod gaussian;
pub mod info;
pub mod model;
mod nnls;
pub mod ordering;
pub mod plan;
pub mod rates;
pub mod selftest;
pub mod theorem;

pub use error::{Error, Result};
