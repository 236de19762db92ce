//! Data-driven network simulation (DDNS) for vehicular cellular links.
//!
//! The crate learns end-to-end data-rate behavior from drive-test traces and
//! replays traces through opportunistic transmission schemes:
//!
//! - [`trace`]: measurement data model, planar projection, synthetic scenarios
//! - [`regression`]: CART trees, random forest, cross-validation, R², MDI
//! - [`derivation`]: 1-D Gaussian-process error model and virtual measurements
//! - [`connmap`]: grid-keyed connectivity map with feature and prediction layers
//! - [`schemes`]: periodic, CAT, pCAT, ML-CAT and ML-pCAT decision policies
//! - [`engine`]: 1 Hz trace-replay simulator
//! - [`metrics`]: ECDFs, ECDF-correlation similarity, summary statistics
//!
//! Everything here is `no_std` (with `alloc`). File formats, the CLI and the
//! parallel sweep runner live in the `ddns` crate.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod connmap;
pub mod derivation;
pub mod engine;
mod error;
pub mod linalg;
pub mod metrics;
pub mod regression;
pub mod rng;
pub mod schemes;
pub mod trace;

pub use error::{Error, Result};
