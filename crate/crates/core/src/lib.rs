//! Computational laboratory for Rademacher random multiplicative functions.
//!
//! The crate covers prime sieving, certified evaluation of the deterministic
//! prime sums that control the random prime series `P(sigma)`, simulation of
//! the partial sums `M_f(x)` with sign-change counting, the explicit parameter
//! sequences behind the sign-change intervals, dyadic chaining, and
//! Hoeffding-type concentration experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chaining;
pub mod concentration;
pub mod error;
pub mod keyed;
pub mod prime_series;
pub mod primes;
pub mod rmf;
pub mod sequences;
pub mod summation;

pub use error::{Error, Result};
pub use prime_series::CertifiedValue;
