//! Closed-form predictions of the IV estimate when both the instrument and
//! the dependent variable are autocorrelated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BIAS_HEADER: &str = "beta,pred_estimate,inflation,demand_ar_sum,instrument_ar_sum";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasPrediction {
    pub true_slope: f64,
    pub predicted_estimate: f64,
    /// `predicted_estimate / true_slope`; 1 when the true slope is zero.
    pub inflation_factor: f64,
    pub demand_ar_sum: f64,
    pub instrument_ar_sum: f64,
}

impl BiasPrediction {
    /// `beta,pred_estimate,inflation,demand_ar_sum,instrument_ar_sum`
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.true_slope, self.predicted_estimate, self.inflation_factor, self.demand_ar_sum, self.instrument_ar_sum
        )
    }
}

fn predict(beta: f64, demand_ar_sum: f64, instrument_ar_sum: f64) -> Result<BiasPrediction> {
    let product = demand_ar_sum * instrument_ar_sum;
    if !(product.abs() < 1.0) {
        return Err(Error::BiasPole { product });
    }
    let inflation_factor = 1.0 / (1.0 - product);
    Ok(BiasPrediction {
        true_slope: beta,
        predicted_estimate: beta * inflation_factor,
        inflation_factor: if beta == 0.0 { 1.0 } else { inflation_factor },
        demand_ar_sum,
        instrument_ar_sum,
    })
}

/// `beta / (1 - alpha_instrument * alpha_dependent)` for AR(1) instrument and
/// dependent variable.
pub fn thams_bias_ar1(beta: f64, alpha_instrument: f64, alpha_dependent: f64) -> Result<BiasPrediction> {
    predict(beta, alpha_dependent, alpha_instrument)
}

/// Generalization to higher orders through the coefficient sums:
/// `beta / (1 - sum(demand_coeffs) * sum(instrument_coeffs))`.
pub fn thams_bias_general(beta: f64, demand_coeffs: &[f64], instrument_coeffs: &[f64]) -> Result<BiasPrediction> {
    predict(beta, demand_coeffs.iter().sum(), instrument_coeffs.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn no_autocorrelation_no_bias() {
        assert_eq!(thams_bias_ar1(-0.4, 0.0, 0.9).unwrap().predicted_estimate, -0.4);
        assert_eq!(thams_bias_ar1(-0.4, 0.9, 0.0).unwrap().predicted_estimate, -0.4);
    }

    #[test]
    fn five_times_the_true_effect() {
        let p = thams_bias_ar1(-0.4, 0.99, 0.8).unwrap();
        assert!((p.predicted_estimate - (-0.4 / 0.208)).abs() < 1e-12);
        assert!((p.predicted_estimate + 1.923).abs() < 1e-3);
        assert!((p.inflation_factor - 4.8077).abs() < 1e-4);
    }

    #[test]
    fn general_form_with_demand_and_wind_ar2() {
        let p = thams_bias_general(-0.4, &[1.20, -0.24], &[1.84, -0.85]).unwrap();
        assert!((p.demand_ar_sum - 0.96).abs() < 1e-12);
        assert!((p.instrument_ar_sum - 0.99).abs() < 1e-12);
        assert!((p.predicted_estimate - (-0.4 / (1.0 - 0.9504))).abs() < 1e-9);
        assert!((p.predicted_estimate + 8.06).abs() < 0.01);
    }

    #[test]
    fn pole_is_an_error() {
        assert!(matches!(thams_bias_general(-0.4, &[1.0], &[1.0]), Err(Error::BiasPole { .. })));
        assert!(matches!(thams_bias_ar1(-0.4, 1.25, 0.8), Err(Error::BiasPole { .. })));
    }

    #[test]
    fn inelastic_inflation_is_one() {
        let p = thams_bias_ar1(0.0, 0.9, 0.9).unwrap();
        assert_eq!(p.predicted_estimate, 0.0);
        assert_eq!(p.inflation_factor, 1.0);
    }

    proptest! {
        #[test]
        fn ar1_is_symmetric_and_matches_general(beta in -2.0f64..2.0, a in -0.99f64..0.99, b in -0.99f64..0.99) {
            let x = thams_bias_ar1(beta, a, b).unwrap();
            let y = thams_bias_ar1(beta, b, a).unwrap();
            let g = thams_bias_general(beta, &[b], &[a]).unwrap();
            prop_assert!((x.predicted_estimate - y.predicted_estimate).abs() < 1e-12);
            prop_assert_eq!(x.predicted_estimate, g.predicted_estimate);
        }

        #[test]
        fn zero_slope_predicts_zero(d in proptest::collection::vec(-0.45f64..0.45, 0..3), w in proptest::collection::vec(-0.45f64..0.45, 0..3)) {
            prop_assert_eq!(thams_bias_general(0.0, &d, &w).unwrap().predicted_estimate, 0.0);
        }

        #[test]
        fn more_negative_in_each_sum(beta in -2.0f64..-0.01, s1 in 0.01f64..0.9, s2 in 0.01f64..0.9, ds in 0.001f64..0.09) {
            let base = thams_bias_general(beta, &[s1], &[s2]).unwrap().predicted_estimate;
            let up1 = thams_bias_general(beta, &[s1 + ds], &[s2]).unwrap().predicted_estimate;
            let up2 = thams_bias_general(beta, &[s1], &[s2 + ds]).unwrap().predicted_estimate;
            prop_assert!(up1 < base && up2 < base);
        }

        #[test]
        fn estimate_is_slope_times_inflation(beta in -2.0f64..2.0, a in -0.99f64..0.99, b in -0.99f64..0.99) {
            let p = thams_bias_ar1(beta, a, b).unwrap();
            prop_assert!(p.inflation_factor.is_finite());
            if beta != 0.0 {
                prop_assert!((p.predicted_estimate - beta * p.inflation_factor).abs() < 1e-12);
            }
        }
    }
}
