//! File formats, experiment bundles and drivers for the `latent-guard` CLI.

pub mod bundle;
pub mod container;
pub mod error;
pub mod idx;
pub mod pipeline;
pub mod plot;
pub mod scores;

pub use error::{Error, Result};
