//! File formats, model persistence, parallel sweeps and the command
//! implementations behind the `ddns` binary.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod model;
pub mod report;
pub mod stats;
pub mod sweep;
pub mod training;

pub use error::{Error, ErrorKind, Result};
