//! Exact missing-digits sets, their natural measures, and the machinery to run
//! Diophantine approximation experiments against them: neighborhoods of shifted
//! rationals as exact region unions, counting/covering/ubiquity audits, Fourier
//! transforms of the natural measure, dimension-formula evaluators, and
//! finite-stage limsup-set experiments.
//!
//! Everything in this crate is pure and deterministic: rational endpoints are
//! exact, measures come with certified error bounds, and sampling uses
//! counter-based streams so parallel and sequential runs agree element-wise.
//! The crate is `no_std` (with `alloc`); IO, CLI, and file formats live in the
//! companion `missdig-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod approx;
pub mod audit;
pub mod digits;
pub mod distance;
pub mod fl;
pub mod formulas;
pub mod fourier;
pub mod geometry;
pub mod limsup;
pub mod measure;
pub mod rat;
pub mod region;
pub mod sample;
pub mod stream;

pub use digits::{CylinderWord, DigitSystem};
pub use measure::MeasureValue;
pub use rat::Rat;
pub use region::{Interval, RegionUnion};
