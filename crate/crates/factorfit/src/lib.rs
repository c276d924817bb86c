//! Analysis toolkit for two-way contingency tables of non-negative integer
//! observations.
//!
//! The crate covers the full path from raw table to report: chi-square
//! independence screening with outlier-row withdrawal, rank-1 multiplicative
//! factorization by alternating least squares, maximum-likelihood fitting of
//! six distribution families, Kolmogorov-Smirnov / Anderson-Darling /
//! chi-square goodness-of-fit batteries with combined statistics,
//! Poisson-Gamma mixture verification by quadrature, coupled Gamma likelihood
//! maximizations, differential entropy, and Gamma-Gamma convolution curves.
//!
//! Start with [`table::ContingencyTable::bundled_dataset`] and
//! [`pipeline::run_pipeline`], or see the `examples/` directory for one
//! runnable walk-through per capability.

pub mod distributions;
pub mod error;
pub mod factorize;
pub mod gof;
pub mod independence;
pub mod mixture;
pub mod pipeline;
pub mod special;
pub mod table;

pub use error::{Error, Result};
