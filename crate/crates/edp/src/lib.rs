//! File formats, configuration, manifests and commands around the
//! `edp-core` sampler.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod manifest;
pub mod study;

pub use error::{CliError, Result};
