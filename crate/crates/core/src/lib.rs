//! Alpha tests for conditional time-varying factor models with serially
//! dependent errors.
//!
//! The pipeline is: build a B-spline sieve design ([`spline`]), fit the
//! null-restricted regression ([`projection`]), then run the
//! independence-calibrated benchmarks ([`classical`]) and the
//! dependence-robust block-bootstrap tests ([`dependent`]). [`dgp`] and
//! [`montecarlo`] reproduce the simulation designs; [`empirical`] runs the
//! same battery on return and factor files.

pub mod blocklen;
pub mod classical;
pub mod cli;
pub mod combination;
pub mod dependent;
pub mod dgp;
pub mod dist;
pub mod empirical;
pub mod error;
pub mod montecarlo;
pub mod outcome;
pub mod panel;
pub mod pipeline;
pub mod projection;
pub mod rng;
pub mod spline;

pub use error::{Error, Result};
pub use outcome::{Calibration, TestName, TestOutcome};
pub use panel::{FactorSeries, ReturnPanel};
