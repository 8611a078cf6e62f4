//! Exact verification workbench for the generalized sticky random walk
//! `S(n, p, lambda)`.
//!
//! The walk lives on `Z_p`: the first symbol is uniform and every later step
//! follows the mixture law `(1 - delta) * Uniform + delta * Stay`. The crate
//! computes the exact law of the zero count `|s|_0`, the Krawtchouk expansion
//! of its probability ratio, the total variation distance to the uniform zero
//! count, the spectrum of the transition matrix and the state-grouping
//! reduction. Every closed form is paired with an independent brute-force
//! route (enumeration, dynamic programming, literal character sums).
//!
//! Two bias parameterizations are in play. [`chain::WalkParams`] stores the
//! mixture weight `delta` canonically and exposes `lambda = delta / p`,
//! the per-state bias in the "stay with probability `1/p + (p-1) lambda`"
//! form.

pub mod chain;
pub mod cli;
mod error;
pub mod krawtchouk;
pub mod moments;
pub mod numerics;
pub mod poly;
pub mod spectral;
pub mod tvd;
pub mod verify;

pub use error::{Error, Result};
pub use num_bigint::BigInt;
pub use num_rational::BigRational;

/// Schema identifier stamped into every JSON artifact.
pub const SCHEMA_VERSION: &str = "sticky-lab/1";
