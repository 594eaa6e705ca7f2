//! Enriched Dirichlet process mixtures of linear mixed models for
//! longitudinal outcomes with covariate-driven clustering.
//!
//! The crate is `no_std` with `alloc`; file formats and the command-line
//! front end live in the companion `edp` crate.

#![no_std]

extern crate alloc;

pub mod cluster_summary;
pub mod conjugate;
pub mod design;
pub mod diagnostics;
pub mod error;
pub mod math;
pub mod predict;
pub mod sampler;
pub mod simulate;
pub mod splines;
pub mod types;

#[cfg(test)]
pub(crate) mod test_fixtures;

pub use error::{Error, Result};
pub use types::*;
