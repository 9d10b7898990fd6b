//! Simulation and estimation toolkit for the price elasticity of electricity
//! demand identified with autocorrelated wind instruments.
//!
//! The crate covers the full pipeline: autoregressive series tools
//! ([`series`]), wind providers ([`wind`]), a linear merit-order market
//! simulator ([`market`]), HAC-robust OLS/2SLS strategies ([`estimators`]),
//! the closed-form IV bias under autocorrelation ([`bias`]) and the
//! experiment harness ([`harness`]).

pub mod bias;
pub mod error;
pub mod estimators;
pub mod harness;
mod linalg;
pub mod market;
pub mod rng;
pub mod series;
pub mod wind;

pub use error::{Error, Result};
