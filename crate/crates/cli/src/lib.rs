//! IO, file formats, and parallel drivers for the `missdig` toolkit.
//!
//! The core crate is pure and `no_std`; everything that touches the outside
//! world lives here: run configuration, CSV/JSON/plot-data emission with
//! embedded config hashes, and rayon-parallel wrappers around the core's
//! task-split engines.

pub mod config;
pub mod emit;
pub mod par;
pub mod run;
