//! Regression engine and identification strategies.

mod hac;
mod regression;
mod strategy;

pub use hac::{auto_bandwidth, bartlett_weight, hac_covariance, Bandwidth};
pub use regression::{ols, tsls, Column, RegressionFit, INTERCEPT, WEAK_INSTRUMENT_F};
pub use strategy::{estimate, EstimationResult, StrategyKind, StrategySpec, CI_CRITICAL, ESTIMATE_HEADER};
