use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{calibrate_intercept, simulate_market, EquilibriumPanel, MarketParams, DEFAULT_BURN_IN};
use crate::rng;
use crate::wind::{WindKind, WindSpec};

/// Average hourly demand of the synthetic market, MWh.
pub const DEFAULT_TARGET_DEMAND: f64 = 374.0;
/// Wind length before burn-in: 13 months of hourly data.
pub const DEFAULT_LENGTH: usize = 9432;
pub const DEFAULT_SEED: u64 = 2019;
/// Price-responsive demand slope, MWh per EUR/MWh.
pub const ELASTIC_SLOPE: f64 = -0.4;

/// Demand AR coefficients and innovation variance estimated on Danish
/// industrial demand for orders 0, 1 and 2.
pub fn demand_ar_table(order: usize) -> Option<(&'static [f64], f64)> {
    match order {
        0 => Some((&[], 309.49)),
        1 => Some((&[0.97], 20.72)),
        2 => Some((&[1.20, -0.24], 19.52)),
        _ => None,
    }
}

/// Supply side shared by every scenario: intercept 0, slope 4 MWh per EUR/MWh,
/// wind effect 16 MWh per m/s, noise variance 0.01.
pub fn default_supply() -> MarketParams {
    MarketParams::default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub demand_order: usize,
    pub beta: f64,
    /// Replaces the tabulated AR coefficients for `demand_order`.
    pub demand_ar: Option<Vec<f64>>,
    pub wind: WindKind,
    pub target_mean_demand: f64,
    pub seed: u64,
    pub burn_in: usize,
    pub length: usize,
}

impl ScenarioConfig {
    pub fn new(demand_order: usize, beta: f64, wind: WindKind) -> Self {
        Self {
            demand_order,
            beta,
            demand_ar: None,
            wind,
            target_mean_demand: DEFAULT_TARGET_DEMAND,
            seed: DEFAULT_SEED,
            burn_in: DEFAULT_BURN_IN,
            length: DEFAULT_LENGTH,
        }
    }

    pub fn with_demand_ar(mut self, coefficients: Vec<f64>) -> Self {
        self.demand_order = coefficients.len();
        self.demand_ar = Some(coefficients);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if demand_ar_table(self.demand_order).is_none() {
            return Err(Error::InvalidParameter(format!("demand order must be 0, 1 or 2, got {}", self.demand_order)));
        }
        if let Some(ar) = &self.demand_ar {
            if ar.len() != self.demand_order {
                return Err(Error::InvalidParameter(format!(
                    "demand order {} does not match {} AR coefficients",
                    self.demand_order,
                    ar.len()
                )));
            }
        }
        if self.length <= self.burn_in {
            return Err(Error::InvalidParameter(format!(
                "length {} must exceed burn-in {}",
                self.length, self.burn_in
            )));
        }
        Ok(())
    }

    pub fn demand_coefficients(&self) -> Vec<f64> {
        match &self.demand_ar {
            Some(ar) => ar.clone(),
            None => demand_ar_table(self.demand_order).map(|(a, _)| a.to_vec()).unwrap_or_default(),
        }
    }

    /// Market parameters before intercept calibration.
    pub fn uncalibrated_params(&self) -> Result<MarketParams> {
        self.validate()?;
        let (_, noise) = demand_ar_table(self.demand_order).expect("validated");
        Ok(MarketParams {
            demand_intercept: 0.0,
            demand_slope: self.beta,
            demand_ar: self.demand_coefficients(),
            demand_noise_var: noise,
            ..default_supply()
        })
    }

    pub fn wind_spec(&self) -> WindSpec {
        WindSpec::new(self.wind.clone(), self.length, rng::derive_seed(self.seed, 0))
    }

    /// Seed-free identifier of the scenario cell.
    pub fn label(&self) -> String {
        let mut s = format!("L{}", self.demand_order);
        if let Some(ar) = &self.demand_ar {
            let joined: Vec<String> = ar.iter().map(|a| a.to_string()).collect();
            let _ = write!(s, "_ar[{}]", joined.join(";"));
        }
        let _ = write!(s, "_beta{}_{}", self.beta, self.wind);
        s
    }

    pub const CSV_HEADER: &'static str =
        "scenario,demand_order,beta,demand_ar,wind,seed,burn_in,length,target_mean_demand";

    pub fn csv_fields(&self) -> String {
        let ar: Vec<String> = self.demand_coefficients().iter().map(|a| a.to_string()).collect();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.label(),
            self.demand_order,
            self.beta,
            ar.join(";"),
            self.wind,
            self.seed,
            self.burn_in,
            self.length,
            self.target_mean_demand
        )
    }
}

/// Generates the wind, calibrates the demand intercept to the target mean at
/// the realized mean wind speed and simulates the burned-in panel.
pub fn run_scenario(config: &ScenarioConfig) -> Result<EquilibriumPanel> {
    let mut params = config.uncalibrated_params()?;
    let wind = config.wind_spec().generate()?;
    params.demand_intercept = calibrate_intercept(config.target_mean_demand, wind.mean(), &params)?;
    simulate_market(&params, &wind, rng::derive_seed(config.seed, 1), config.burn_in)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elastic_ar1_default_panel() {
        let panel = run_scenario(&ScenarioConfig::new(1, ELASTIC_SLOPE, WindKind::surrogate())).unwrap();
        assert_eq!(panel.len(), 8760);
        let sd = panel.demand().std_dev();
        assert!((sd - 26.2).abs() < 3.0, "demand std {sd}");
    }

    #[test]
    fn inelastic_white_noise_price_spread() {
        let panel = run_scenario(&ScenarioConfig::new(0, 0.0, WindKind::surrogate())).unwrap();
        let sd = panel.price().std_dev();
        assert!((sd - 10.1).abs() < 1.5, "price std {sd}");
    }

    #[test]
    fn reproducible() {
        let c = ScenarioConfig::new(2, ELASTIC_SLOPE, WindKind::surrogate()).with_seed(5);
        assert_eq!(run_scenario(&c).unwrap(), run_scenario(&c).unwrap());
    }

    #[test]
    fn validation() {
        let mut c = ScenarioConfig::new(3, 0.0, WindKind::surrogate());
        assert!(run_scenario(&c).is_err());
        c.demand_order = 1;
        c.demand_ar = Some(vec![0.5, 0.1]);
        assert!(c.validate().is_err());
        let c = ScenarioConfig::new(1, 0.0, WindKind::surrogate()).with_demand_ar(vec![0.8]);
        assert_eq!(c.label(), "L1_ar[0.8]_beta0_surrogate");
        assert!(c.validate().is_ok());
    }
}
