//! IO companion to the modeling core: on-disk formats, run manifests with
//! content hashes, and the command implementations behind the `survmil`
//! binary.

pub mod commands;
pub mod error;
pub mod formats;
pub mod manifest;
pub mod pipeline;

pub use error::{CliError, Result};

/// Tool name recorded in run manifests.
pub const TOOL_NAME: &str = "survmil";
/// Tool version recorded in run manifests.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
