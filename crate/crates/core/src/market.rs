//! Hourly market equilibrium between an autoregressive linear demand curve
//! and a linear supply curve shifted by wind.
//!
//! ```text
//! demand  d_t = b0_d + b_d p_t + sum_l a_l d_{t-l} + e_d
//! supply  s_t = b0_s + b_s p_t + b_w w_t + e_s
//! price   p_t = (db0 + b_w w_t - sum_l a_l d_{t-l} + de) / (-db),   dx := x_s - x_d
//! ```

use std::fmt::Write as _;
use std::path::Path;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::series::{self, TimeSeries, TIMESTAMP_FORMAT};

/// Default burn-in: 28 days of hourly observations.
pub const DEFAULT_BURN_IN: usize = 672;

/// Simulated demand beyond this magnitude (MWh) aborts the simulation.
pub const INSTABILITY_THRESHOLD: f64 = 1e6;

/// Panel export header.
pub const PANEL_HEADER: &str = "timestamp,wind_ms,price_eur_mwh,demand_mwh";

/// Full parameterization of the data-generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    /// MWh
    pub demand_intercept: f64,
    /// MWh per EUR/MWh
    pub demand_slope: f64,
    /// `a_1..a_L`
    pub demand_ar: Vec<f64>,
    pub demand_noise_var: f64,
    /// MWh
    pub supply_intercept: f64,
    /// MWh per EUR/MWh
    pub supply_slope: f64,
    /// MWh per m/s
    pub wind_effect: f64,
    pub supply_noise_var: f64,
}

impl Default for MarketParams {
    /// Flat supply side (intercept 0, slope 4, wind effect 16, noise variance
    /// 0.01) with inelastic white-noise demand around 374 MWh.
    fn default() -> Self {
        Self {
            demand_intercept: 374.0,
            demand_slope: 0.0,
            demand_ar: Vec::new(),
            demand_noise_var: 309.49,
            supply_intercept: 0.0,
            supply_slope: 4.0,
            wind_effect: 16.0,
            supply_noise_var: 0.01,
        }
    }
}

impl MarketParams {
    pub fn demand_order(&self) -> usize {
        self.demand_ar.len()
    }

    /// `b_s - b_d`.
    pub fn delta_slope(&self) -> f64 {
        self.supply_slope - self.demand_slope
    }

    /// Reduced-form AR coefficients of equilibrium demand,
    /// `a_l * b_s / (b_s - b_d)`.
    pub fn effective_demand_ar(&self) -> Vec<f64> {
        let scale = self.supply_slope / self.delta_slope();
        self.demand_ar.iter().map(|a| a * scale).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.demand_intercept,
            self.demand_slope,
            self.demand_noise_var,
            self.supply_intercept,
            self.supply_slope,
            self.wind_effect,
            self.supply_noise_var,
        ]
        .iter()
        .chain(&self.demand_ar)
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("market parameters must be finite".into()));
        }
        if self.delta_slope() == 0.0 {
            return Err(Error::DegenerateEquilibrium { slope: self.supply_slope });
        }
        if self.demand_slope > 0.0 {
            return Err(Error::InvalidParameter(format!(
                "demand slope must be non-positive, got {}",
                self.demand_slope
            )));
        }
        if self.supply_slope <= 0.0 {
            return Err(Error::InvalidParameter(format!("supply slope must be positive, got {}", self.supply_slope)));
        }
        if self.demand_noise_var < 0.0 || self.supply_noise_var < 0.0 {
            return Err(Error::InvalidParameter("noise variances must be non-negative".into()));
        }
        if !series::is_stationary(&self.effective_demand_ar()) {
            return Err(Error::NonStationary(format!(
                "equilibrium demand with AR coefficients {:?} and slopes ({}, {})",
                self.demand_ar, self.demand_slope, self.supply_slope
            )));
        }
        Ok(())
    }

    /// Deterministic steady state `(demand, price)` at a constant wind speed.
    pub fn steady_state(&self, wind: f64) -> (f64, f64) {
        let ar_sum: f64 = self.demand_ar.iter().sum();
        let supply_shift = self.supply_intercept + self.wind_effect * wind;
        let demand = (self.demand_intercept - self.demand_slope * supply_shift / self.supply_slope)
            / (1.0 - ar_sum - self.demand_slope / self.supply_slope);
        let price = (demand - supply_shift) / self.supply_slope;
        (demand, price)
    }
}

fn check_lags(params: &MarketParams, demand_lags: &[f64]) -> Result<()> {
    if demand_lags.len() != params.demand_order() {
        return Err(Error::LagMismatch { expected: params.demand_order(), actual: demand_lags.len() });
    }
    Ok(())
}

fn ar_term(params: &MarketParams, demand_lags: &[f64]) -> f64 {
    params.demand_ar.iter().zip(demand_lags).map(|(a, d)| a * d).sum()
}

/// Market-clearing price. `demand_lags[0]` is `d_{t-1}`, `demand_lags[1]` is
/// `d_{t-2}` and so on.
pub fn equilibrium_price(
    params: &MarketParams,
    wind_t: f64,
    demand_lags: &[f64],
    eps_d: f64,
    eps_s: f64,
) -> Result<f64> {
    let delta_slope = params.delta_slope();
    if delta_slope == 0.0 {
        return Err(Error::DegenerateEquilibrium { slope: params.supply_slope });
    }
    check_lags(params, demand_lags)?;
    let delta_intercept = params.supply_intercept - params.demand_intercept;
    let numerator = delta_intercept + params.wind_effect * wind_t - ar_term(params, demand_lags) + (eps_s - eps_d);
    Ok(numerator / -delta_slope)
}

/// Demand at price `price_t`; lag ordering as in [`equilibrium_price`].
pub fn demand_response(params: &MarketParams, price_t: f64, demand_lags: &[f64], eps_d: f64) -> Result<f64> {
    check_lags(params, demand_lags)?;
    Ok(params.demand_intercept + params.demand_slope * price_t + ar_term(params, demand_lags) + eps_d)
}

pub fn supply(params: &MarketParams, price_t: f64, wind_t: f64, eps_s: f64) -> f64 {
    params.supply_intercept + params.supply_slope * price_t + params.wind_effect * wind_t + eps_s
}

/// Demand intercept that makes `(target_mean_demand, mu_p)` the deterministic
/// steady state at `mean_wind`, where
/// `mu_p = (target_mean_demand - b_w * mean_wind - b0_s) / b_s`. The
/// `demand_intercept` field of `params` is ignored.
pub fn calibrate_intercept(target_mean_demand: f64, mean_wind: f64, params: &MarketParams) -> Result<f64> {
    if params.supply_slope <= 0.0 {
        return Err(Error::InvalidParameter(format!("supply slope must be positive, got {}", params.supply_slope)));
    }
    let mean_price =
        (target_mean_demand - params.wind_effect * mean_wind - params.supply_intercept) / params.supply_slope;
    let ar_sum: f64 = params.demand_ar.iter().sum();
    Ok(target_mean_demand * (1.0 - ar_sum) - params.demand_slope * mean_price)
}

/// Realized innovations of a simulated panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelNoise {
    pub demand: Vec<f64>,
    pub supply: Vec<f64>,
}

/// Aligned wind, price and demand after burn-in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumPanel {
    wind: TimeSeries,
    price: TimeSeries,
    demand: TimeSeries,
    params: Option<MarketParams>,
    burn_in_dropped: usize,
    noise: Option<PanelNoise>,
}

impl EquilibriumPanel {
    /// Panel from observed series (no generating parameters attached).
    pub fn new(wind: TimeSeries, price: TimeSeries, demand: TimeSeries) -> Result<Self> {
        if wind.len() != price.len() || wind.len() != demand.len() {
            return Err(Error::InvalidParameter(format!(
                "panel series lengths differ: wind {}, price {}, demand {}",
                wind.len(),
                price.len(),
                demand.len()
            )));
        }
        Ok(Self { wind, price, demand, params: None, burn_in_dropped: 0, noise: None })
    }

    pub fn len(&self) -> usize {
        self.wind.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wind.is_empty()
    }

    pub fn wind(&self) -> &TimeSeries {
        &self.wind
    }

    pub fn price(&self) -> &TimeSeries {
        &self.price
    }

    pub fn demand(&self) -> &TimeSeries {
        &self.demand
    }

    pub fn params(&self) -> Option<&MarketParams> {
        self.params.as_ref()
    }

    pub fn burn_in_dropped(&self) -> usize {
        self.burn_in_dropped
    }

    pub fn noise(&self) -> Option<&PanelNoise> {
        self.noise.as_ref()
    }

    /// Relative market-clearing error `|d_t - s_t| / max(1, |d_t|)` at every
    /// step; needs the generating parameters and realized noise.
    pub fn clearing_errors(&self) -> Option<Vec<f64>> {
        let params = self.params.as_ref()?;
        let noise = self.noise.as_ref()?;
        Some(
            (0..self.len())
                .map(|t| {
                    let d = self.demand.values()[t];
                    let s = supply(params, self.price.values()[t], self.wind.values()[t], noise.supply[t]);
                    (d - s).abs() / d.abs().max(1.0)
                })
                .collect(),
        )
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 64);
        out.push_str(PANEL_HEADER);
        out.push('\n');
        for t in 0..self.len() {
            let ts = self.wind.timestamp(t).map(|ts| ts.format(TIMESTAMP_FORMAT).to_string()).unwrap_or_default();
            let _ =
                writeln!(out, "{ts},{},{},{}", self.wind.values()[t], self.price.values()[t], self.demand.values()[t]);
        }
        out
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
        match lines.next() {
            Some((_, h)) if h.trim() == PANEL_HEADER => {}
            Some((row, h)) => {
                return Err(Error::Parse { row, message: format!("expected header `{PANEL_HEADER}`, found `{h}`") })
            }
            None => return Err(Error::InvalidSeries("empty panel file".into())),
        }
        let (mut wind, mut price, mut demand) = (Vec::new(), Vec::new(), Vec::new());
        let mut start = None;
        let mut previous = None;
        for (row, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::Parse { row, message: format!("expected 4 fields, found {}", fields.len()) });
            }
            let ts = fields[0].trim();
            if !ts.is_empty() {
                let parsed = series::parse_timestamp(ts)
                    .ok_or_else(|| Error::Parse { row, message: format!("cannot parse timestamp `{ts}`") })?;
                if previous.is_some_and(|p| parsed <= p) {
                    return Err(Error::Parse { row, message: format!("timestamp {parsed} does not increase") });
                }
                if wind.is_empty() {
                    start = Some(parsed);
                }
                previous = Some(parsed);
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse { row, message: format!("cannot parse `{}` as a number", s.trim()) })
            };
            wind.push(parse(fields[1])?);
            price.push(parse(fields[2])?);
            demand.push(parse(fields[3])?);
        }
        let mk = |v: Vec<f64>, label: &str| -> Result<TimeSeries> {
            Ok(TimeSeries::new(v)?.with_start(start).with_label(label))
        };
        Self::new(mk(wind, "wind")?, mk(price, "price")?, mk(demand, "demand")?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_str(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Runs the market hour by hour over the whole wind series and drops the
/// first `burn_in` observations. Pre-sample demand lags are the deterministic
/// steady state at the mean wind speed; demand and supply innovations come
/// from two independent streams of `seed`.
pub fn simulate_market(
    params: &MarketParams,
    wind: &TimeSeries,
    seed: u64,
    burn_in: usize,
) -> Result<EquilibriumPanel> {
    params.validate()?;
    let order = params.demand_order();
    let required = burn_in + order.max(1) + 1;
    if wind.len() < required {
        return Err(Error::TooShort { required, actual: wind.len() });
    }

    let demand_noise =
        Normal::new(0.0, params.demand_noise_var.sqrt()).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let supply_noise =
        Normal::new(0.0, params.supply_noise_var.sqrt()).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut demand_rng = rng::rng_stream(seed, 0);
    let mut supply_rng = rng::rng_stream(seed, 1);

    let n = wind.len();
    let (initial, _) = params.steady_state(wind.mean());
    // Most recent lag first.
    let mut lags = vec![initial; order];
    let mut price = Vec::with_capacity(n);
    let mut demand = Vec::with_capacity(n);
    let mut eps_d_all = Vec::with_capacity(n);
    let mut eps_s_all = Vec::with_capacity(n);

    for (t, &w) in wind.values().iter().enumerate() {
        let eps_d = demand_noise.sample(&mut demand_rng);
        let eps_s = supply_noise.sample(&mut supply_rng);
        let p = equilibrium_price(params, w, &lags, eps_d, eps_s)?;
        let d = demand_response(params, p, &lags, eps_d)?;
        if !(d.abs() <= INSTABILITY_THRESHOLD) {
            return Err(Error::Unstable { step: t, value: d });
        }
        if order > 0 {
            lags.rotate_right(1);
            lags[0] = d;
        }
        price.push(p);
        demand.push(d);
        eps_d_all.push(eps_d);
        eps_s_all.push(eps_s);
    }

    let start = wind.timestamp(burn_in);
    let mk = |v: &[f64], label: &str| -> Result<TimeSeries> {
        Ok(TimeSeries::new(v[burn_in..].to_vec())?.with_start(start).with_label(label))
    };
    Ok(EquilibriumPanel {
        wind: mk(wind.values(), "wind")?,
        price: mk(&price, "price")?,
        demand: mk(&demand, "demand")?,
        params: Some(params.clone()),
        burn_in_dropped: burn_in,
        noise: Some(PanelNoise { demand: eps_d_all[burn_in..].to_vec(), supply: eps_s_all[burn_in..].to_vec() }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::fit_ar;
    use crate::wind::{surrogate_wind, SurrogateCalibration};

    fn params(beta: f64, ar: Vec<f64>, noise: f64) -> MarketParams {
        MarketParams { demand_slope: beta, demand_ar: ar, demand_noise_var: noise, ..MarketParams::default() }
    }

    #[test]
    fn price_by_direct_substitution() {
        let p = MarketParams { demand_intercept: 400.0, ..params(0.0, vec![], 0.0) };
        // (0 - 400 + 16 * 7.5) / (0 - 4) = 70
        let price = equilibrium_price(&p, 7.5, &[], 0.0, 0.0).unwrap();
        assert!((price - 70.0).abs() < 1e-12);
        assert!((demand_response(&p, price, &[], 0.0).unwrap() - 400.0).abs() < 1e-12);
    }

    #[test]
    fn coincident_slopes_are_rejected() {
        let p = MarketParams { demand_slope: 4.0, ..MarketParams::default() };
        assert!(matches!(equilibrium_price(&p, 7.5, &[], 0.0, 0.0), Err(Error::DegenerateEquilibrium { .. })));
        assert!(p.validate().is_err());
    }

    #[test]
    fn lag_count_is_checked() {
        let p = params(-0.4, vec![0.97], 20.72);
        assert!(matches!(demand_response(&p, 60.0, &[], 0.0), Err(Error::LagMismatch { .. })));
        assert!(matches!(equilibrium_price(&p, 7.0, &[1.0, 2.0], 0.0, 0.0), Err(Error::LagMismatch { .. })));
    }

    #[test]
    fn calibration_examples() {
        let b = calibrate_intercept(374.0, 7.6, &params(-0.4, vec![], 0.0)).unwrap();
        // mu_p = (374 - 121.6) / 4 = 63.1; 374 + 0.4 * 63.1 = 399.24
        assert!((b - 399.24).abs() < 1e-9);
        assert!((b - 399.44).abs() < 0.5);
        assert!((calibrate_intercept(374.0, 7.6, &params(0.0, vec![], 0.0)).unwrap() - 374.0).abs() < 1e-12);
        let b1 = calibrate_intercept(374.0, 7.6, &params(0.0, vec![0.97], 0.0)).unwrap();
        assert!((b1 - 11.22).abs() < 1e-9);
    }

    #[test]
    fn calibrated_steady_state_is_target() {
        let mut p = params(-0.4, vec![0.97], 20.72);
        p.demand_intercept = calibrate_intercept(374.0, 7.6, &p).unwrap();
        let (d, price) = p.steady_state(7.6);
        assert!((d - 374.0).abs() < 1e-9);
        assert!((price - 63.1).abs() < 1e-9);
        let p_eq = equilibrium_price(&p, 7.6, &[374.0], 0.0, 0.0).unwrap();
        assert!((p_eq - 63.1).abs() < 1e-9);
        assert!((demand_response(&p, p_eq, &[374.0], 0.0).unwrap() - 374.0).abs() < 1e-9);
    }

    fn wind() -> TimeSeries {
        surrogate_wind(&SurrogateCalibration::default(), 9432, 5).unwrap()
    }

    #[test]
    fn panel_length_and_clearing() {
        let mut p = params(-0.4, vec![1.20, -0.24], 19.52);
        p.demand_intercept = calibrate_intercept(374.0, 7.6, &p).unwrap();
        let panel = simulate_market(&p, &wind(), 1, DEFAULT_BURN_IN).unwrap();
        assert_eq!(panel.len(), 8760);
        assert_eq!(panel.burn_in_dropped(), 672);
        let worst = panel.clearing_errors().unwrap().into_iter().fold(0.0, f64::max);
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn inelastic_ar1_demand_keeps_its_coefficient() {
        let mut p = params(0.0, vec![0.97], 20.72);
        p.demand_intercept = calibrate_intercept(374.0, 7.6, &p).unwrap();
        let panel = simulate_market(&p, &wind(), 2, DEFAULT_BURN_IN).unwrap();
        let a = fit_ar(panel.demand(), 1).unwrap().coefficients()[0];
        assert!((a - 0.97).abs() < 0.02, "{a}");
    }

    #[test]
    fn inelastic_price_correlates_with_demand_noise() {
        let mut p = params(0.0, vec![0.97], 20.72);
        p.demand_intercept = calibrate_intercept(374.0, 7.6, &p).unwrap();
        let panel = simulate_market(&p, &wind(), 3, DEFAULT_BURN_IN).unwrap();
        let noise = TimeSeries::new(panel.noise().unwrap().demand.clone()).unwrap();
        let (pm, nm) = (panel.price().mean(), noise.mean());
        let cov: f64 = panel.price().values().iter().zip(noise.values()).map(|(a, b)| (a - pm) * (b - nm)).sum();
        assert!(cov > 0.0);
    }

    #[test]
    fn simulation_errors() {
        let p = params(0.0, vec![], 1.0);
        let short = TimeSeries::new(vec![7.0; 10]).unwrap();
        assert!(matches!(simulate_market(&p, &short, 0, 9), Err(Error::TooShort { .. })));

        let explosive = params(0.0, vec![1.05], 1.0);
        assert!(matches!(explosive.validate(), Err(Error::NonStationary(_))));

        let upward = params(0.5, vec![], 1.0);
        assert!(upward.validate().is_err());
    }

    #[test]
    fn determinism_and_csv_round_trip() {
        let p = params(-0.4, vec![0.97], 20.72);
        let w = wind();
        let a = simulate_market(&p, &w, 9, 100).unwrap();
        assert_eq!(a, simulate_market(&p, &w, 9, 100).unwrap());
        let back = EquilibriumPanel::from_csv_str(&a.to_csv()).unwrap();
        assert_eq!(back.wind(), a.wind());
        assert_eq!(back.price().values(), a.price().values());
        assert_eq!(back.demand().values(), a.demand().values());
        assert_eq!(back.price().start(), a.price().start());
    }

    #[test]
    fn panel_csv_errors() {
        assert!(EquilibriumPanel::from_csv_str("a,b\n1,2\n").is_err());
        let bad = format!("{PANEL_HEADER}\n,1,2,3\n,1,x,3\n");
        assert!(matches!(EquilibriumPanel::from_csv_str(&bad), Err(Error::Parse { row: 3, .. })));
    }
}
