//! Expected signatures and Wiener chaos kernels of centred Gaussian processes.
//!
//! The crate is `no_std` (with `alloc`). It contains the pure numerical
//! machinery:
//!
//! - [`words`]: truncated tensor series indexed by words, with shuffle and
//!   Chen products.
//! - [`diagrams`]: partial pairings of `1..=n` and their classification into
//!   consecutive pairs and arcs.
//! - [`covariance`]: covariance models (fBm, Brownian motion, Brownian bridge,
//!   centred Ornstein-Uhlenbeck) with closed-form derivatives.
//! - [`engine`]: the simplex integrals attached to each diagram, expected
//!   signatures and chaos kernels.
//! - [`oracle`]: exact expected signatures and kernels of piecewise-linear
//!   approximations on a uniform grid.
//! - [`montecarlo`]: exact Gaussian path sampling and pathwise signatures.
//!
//! IO, JSON and the command-line interface live in the `esig` crate.
#![no_std]

extern crate alloc;

pub mod covariance;
pub mod diagrams;
pub mod engine;
mod error;
pub mod linalg;
pub mod montecarlo;
pub mod oracle;
pub mod quadrature;
pub mod words;

pub use error::{Error, Result};
