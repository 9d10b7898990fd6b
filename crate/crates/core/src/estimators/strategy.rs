//! The identification strategies applied to an equilibrium panel.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::hac::Bandwidth;
use super::regression::{ols, tsls, Column, RegressionFit};
use crate::error::{Error, Result};
use crate::market::EquilibriumPanel;
use crate::series;

/// Two-sided 95% normal critical value.
pub const CI_CRITICAL: f64 = 1.959964;

/// Header of the estimation export row.
pub const ESTIMATE_HEADER: &str = "strategy,slope,std_error,ci_low,ci_high,first_stage_f,nobs";

const PRICE: &str = "price";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategyKind {
    /// Demand on price.
    Ols,
    /// Price instrumented by its first lag.
    LagpriceIv,
    /// Price instrumented by contemporaneous wind.
    RegularIv,
    /// Regular IV on first differences of all three series.
    RegularIvDiff,
    /// Regular IV controlling for `wind_lags` lags of wind in both stages.
    ConditionalIv { wind_lags: usize },
    /// Regular IV controlling for `demand_lags` lags of demand in both stages.
    NuisanceIv { demand_lags: usize },
}

impl StrategyKind {
    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::Ols => "ols",
            StrategyKind::LagpriceIv => "lagprice_iv",
            StrategyKind::RegularIv => "regular_iv",
            StrategyKind::RegularIvDiff => "regular_iv_diff",
            StrategyKind::ConditionalIv { .. } => "conditional_iv",
            StrategyKind::NuisanceIv { .. } => "nuisance_iv",
        }
    }

    /// Builds a strategy from its name; `wind_lags` and `demand_lags` are
    /// required for the conditional and nuisance designs respectively.
    pub fn from_name(name: &str, wind_lags: Option<usize>, demand_lags: Option<usize>) -> Result<Self> {
        let missing = |flag: &str| Error::InvalidParameter(format!("strategy `{name}` needs {flag}"));
        match name {
            "ols" => Ok(StrategyKind::Ols),
            "lagprice_iv" => Ok(StrategyKind::LagpriceIv),
            "regular_iv" => Ok(StrategyKind::RegularIv),
            "regular_iv_diff" => Ok(StrategyKind::RegularIvDiff),
            "conditional_iv" => {
                Ok(StrategyKind::ConditionalIv { wind_lags: wind_lags.ok_or_else(|| missing("a wind lag count"))? })
            }
            "nuisance_iv" => {
                Ok(StrategyKind::NuisanceIv { demand_lags: demand_lags.ok_or_else(|| missing("a demand lag count"))? })
            }
            other => Err(Error::InvalidParameter(format!("unknown strategy `{other}`"))),
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyKind::ConditionalIv { wind_lags } => write!(f, "conditional_iv[m={wind_lags}]"),
            StrategyKind::NuisanceIv { demand_lags } => write!(f, "nuisance_iv[l={demand_lags}]"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    /// Accepts the display form, e.g. `conditional_iv[m=26]`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.split_once('[') {
            None => Self::from_name(s, None, None),
            Some((name, rest)) => {
                let arg = rest.strip_suffix(']').and_then(|r| r.split_once('='));
                let bad = || Error::InvalidParameter(format!("cannot parse strategy `{s}`"));
                let (key, value) = arg.ok_or_else(bad)?;
                let value: usize = value.parse().map_err(|_| bad())?;
                match key {
                    "m" => Self::from_name(name, Some(value), None),
                    "l" => Self::from_name(name, None, Some(value)),
                    _ => Err(bad()),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategySpec {
    pub kind: StrategyKind,
    pub hac_bandwidth: Bandwidth,
}

impl StrategySpec {
    pub fn new(kind: StrategyKind) -> Self {
        Self { kind, hac_bandwidth: Bandwidth::Auto }
    }

    pub fn with_bandwidth(mut self, bandwidth: Bandwidth) -> Self {
        self.hac_bandwidth = bandwidth;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            StrategyKind::ConditionalIv { wind_lags: 0 } => {
                Err(Error::InvalidParameter("conditional_iv needs at least one wind lag".into()))
            }
            StrategyKind::NuisanceIv { demand_lags: 0 } => {
                Err(Error::InvalidParameter("nuisance_iv needs at least one demand lag".into()))
            }
            _ => Ok(()),
        }
    }

    /// Rows lost at the front of the panel to lags or differencing.
    pub fn max_lag(&self) -> usize {
        match self.kind {
            StrategyKind::Ols | StrategyKind::RegularIv => 0,
            StrategyKind::LagpriceIv | StrategyKind::RegularIvDiff => 1,
            StrategyKind::ConditionalIv { wind_lags } => wind_lags,
            StrategyKind::NuisanceIv { demand_lags } => demand_lags,
        }
    }
}

/// Demand-slope estimate with HAC inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub strategy: StrategySpec,
    pub slope: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub first_stage_f: Option<f64>,
    pub nobs: usize,
    pub weak_instrument: bool,
}

impl EstimationResult {
    fn from_fit(strategy: StrategySpec, fit: &RegressionFit) -> Self {
        let slope = fit.coefficient(PRICE).expect("price column present");
        let std_error = fit.std_error(PRICE).expect("price column present");
        let half = CI_CRITICAL * std_error;
        Self {
            strategy,
            slope,
            std_error,
            ci_low: slope - half,
            ci_high: slope + half,
            first_stage_f: fit.first_stage_f,
            nobs: fit.nobs,
            weak_instrument: fit.weak_instrument,
        }
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }

    pub fn ci_width(&self) -> f64 {
        self.ci_high - self.ci_low
    }

    /// `strategy,slope,std_error,ci_low,ci_high,first_stage_f,nobs`
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.strategy.kind,
            self.slope,
            self.std_error,
            self.ci_low,
            self.ci_high,
            self.first_stage_f.map(|f| f.to_string()).unwrap_or_default(),
            self.nobs
        )
    }
}

fn lagged(values: &[f64], lag: usize, from: usize) -> &[f64] {
    &values[from - lag..values.len() - lag]
}

/// Estimates the demand slope on `panel` with the given strategy. Rows whose
/// lags are unavailable are dropped from the front.
pub fn estimate(strategy: &StrategySpec, panel: &EquilibriumPanel) -> Result<EstimationResult> {
    strategy.validate()?;
    let required = strategy.max_lag() + 4;
    if panel.len() < required {
        return Err(Error::TooShort { required, actual: panel.len() });
    }
    let d = panel.demand().values();
    let p = panel.price().values();
    let w = panel.wind().values();
    let bw = strategy.hac_bandwidth;

    let fit = match strategy.kind {
        StrategyKind::Ols => ols(d, &[Column::new(PRICE, p)], bw)?,
        StrategyKind::LagpriceIv => {
            tsls(&d[1..], Column::new(PRICE, &p[1..]), &[Column::new("price_lag1", lagged(p, 1, 1))], &[], bw)?
        }
        StrategyKind::RegularIv => regular_iv(d, p, w, bw)?,
        StrategyKind::RegularIvDiff => {
            let dd = series::difference(panel.demand())?;
            let dp = series::difference(panel.price())?;
            let dw = series::difference(panel.wind())?;
            regular_iv(dd.values(), dp.values(), dw.values(), bw)?
        }
        StrategyKind::ConditionalIv { wind_lags } => {
            let names: Vec<String> = (1..=wind_lags).map(|l| format!("wind_lag{l}")).collect();
            let controls: Vec<Column<'_>> =
                names.iter().enumerate().map(|(i, n)| Column::new(n, lagged(w, i + 1, wind_lags))).collect();
            tsls(
                &d[wind_lags..],
                Column::new(PRICE, &p[wind_lags..]),
                &[Column::new("wind", &w[wind_lags..])],
                &controls,
                bw,
            )?
        }
        StrategyKind::NuisanceIv { demand_lags } => {
            let names: Vec<String> = (1..=demand_lags).map(|l| format!("demand_lag{l}")).collect();
            let controls: Vec<Column<'_>> =
                names.iter().enumerate().map(|(i, n)| Column::new(n, lagged(d, i + 1, demand_lags))).collect();
            tsls(
                &d[demand_lags..],
                Column::new(PRICE, &p[demand_lags..]),
                &[Column::new("wind", &w[demand_lags..])],
                &controls,
                bw,
            )?
        }
    };
    Ok(EstimationResult::from_fit(*strategy, &fit))
}

fn regular_iv(d: &[f64], p: &[f64], w: &[f64], bw: Bandwidth) -> Result<RegressionFit> {
    tsls(d, Column::new(PRICE, p), &[Column::new("wind", w)], &[], bw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategy_names_round_trip() {
        for kind in [
            StrategyKind::Ols,
            StrategyKind::LagpriceIv,
            StrategyKind::RegularIv,
            StrategyKind::RegularIvDiff,
            StrategyKind::ConditionalIv { wind_lags: 26 },
            StrategyKind::NuisanceIv { demand_lags: 2 },
        ] {
            assert_eq!(kind.to_string().parse::<StrategyKind>().unwrap(), kind);
        }
        assert!("conditional_iv".parse::<StrategyKind>().is_err());
        assert!("magic_iv".parse::<StrategyKind>().is_err());
    }

    #[test]
    fn zero_lag_designs_rejected() {
        assert!(StrategySpec::new(StrategyKind::ConditionalIv { wind_lags: 0 }).validate().is_err());
        assert!(StrategySpec::new(StrategyKind::NuisanceIv { demand_lags: 0 }).validate().is_err());
    }

    #[test]
    fn lag_alignment() {
        let v = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(lagged(&v, 1, 2), &[1.0, 2.0, 3.0]);
        assert_eq!(lagged(&v, 2, 2), &[0.0, 1.0, 2.0]);
    }
}
