//! Bartlett-kernel HAC (Newey-West) sandwich covariance.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel bandwidth: a fixed number of lags or the rule of thumb
/// `floor(4 * (T / 100)^(2/9))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    #[default]
    Auto,
    Fixed(usize),
}

impl Bandwidth {
    pub fn resolve(self, nobs: usize) -> usize {
        match self {
            Bandwidth::Auto => auto_bandwidth(nobs),
            Bandwidth::Fixed(b) => b,
        }
    }
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bandwidth::Auto => f.write_str("auto"),
            Bandwidth::Fixed(b) => write!(f, "{b}"),
        }
    }
}

impl FromStr for Bandwidth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(Bandwidth::Auto),
            other => other
                .parse()
                .map(Bandwidth::Fixed)
                .map_err(|_| Error::InvalidParameter(format!("bandwidth must be `auto` or an integer, got `{other}`"))),
        }
    }
}

pub fn auto_bandwidth(nobs: usize) -> usize {
    (4.0 * (nobs as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize
}

/// Bartlett weight `1 - j / (bandwidth + 1)`.
pub fn bartlett_weight(lag: usize, bandwidth: usize) -> f64 {
    if lag > bandwidth {
        0.0
    } else {
        1.0 - lag as f64 / (bandwidth as f64 + 1.0)
    }
}

/// `(X'X)^{-1} S (X'X)^{-1}` with
/// `S = G_0 + sum_{j=1..bandwidth} w_j (G_j + G_j')` and
/// `G_j = sum_t (x_t e_t)(x_{t-j} e_{t-j})'`.
pub fn hac_covariance(x: &DMatrix<f64>, residuals: &[f64], bandwidth: usize) -> Result<DMatrix<f64>> {
    let k = x.ncols();
    let xtx = x.transpose() * x;
    let bread =
        xtx.cholesky().ok_or_else(|| Error::RankDeficient { column: format!("design column among {k}") })?.inverse();
    hac_with_bread(x, residuals, bandwidth, &bread)
}

pub(crate) fn hac_with_bread(
    x: &DMatrix<f64>,
    residuals: &[f64],
    bandwidth: usize,
    bread: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let (n, k) = x.shape();
    if residuals.len() != n {
        return Err(Error::InvalidParameter(format!("{} residuals for a design with {n} rows", residuals.len())));
    }
    if bandwidth >= n {
        return Err(Error::Bandwidth { bandwidth, nobs: n });
    }

    let mut scores = x.clone();
    for (mut row, e) in scores.row_iter_mut().zip(residuals) {
        row *= *e;
    }

    let mut meat = scores.transpose() * &scores;
    for lag in 1..=bandwidth {
        let current = scores.rows(lag, n - lag);
        let lagged = scores.rows(0, n - lag);
        let gamma = current.transpose() * lagged;
        meat += (&gamma + gamma.transpose()) * bartlett_weight(lag, bandwidth);
    }
    debug_assert_eq!(meat.shape(), (k, k));

    let cov = bread * meat * bread;
    Ok((&cov + cov.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn auto_rule_of_thumb() {
        assert_eq!(auto_bandwidth(100), 4);
        assert_eq!(auto_bandwidth(8760), 10);
        assert_eq!(auto_bandwidth(8759), 10);
    }

    #[test]
    fn weights() {
        assert_eq!(bartlett_weight(0, 3), 1.0);
        assert!((bartlett_weight(1, 3) - 0.75).abs() < 1e-15);
        assert_eq!(bartlett_weight(4, 3), 0.0);
    }

    #[test]
    fn bandwidth_parsing() {
        assert_eq!("auto".parse::<Bandwidth>().unwrap(), Bandwidth::Auto);
        assert_eq!("12".parse::<Bandwidth>().unwrap(), Bandwidth::Fixed(12));
        assert!("-1".parse::<Bandwidth>().is_err());
        assert_eq!(Bandwidth::Auto.resolve(8760), 10);
    }

    #[test]
    fn bandwidth_must_be_below_sample_size() {
        let x = DMatrix::from_element(5, 1, 1.0);
        assert!(matches!(hac_covariance(&x, &[0.1; 5], 5), Err(Error::Bandwidth { .. })));
    }

    #[test]
    fn symmetric_psd_on_random_designs() {
        let mut rng = crate::rng::rng_from_seed(12);
        for _ in 0..1000 {
            let n = rng.random_range(8..40);
            let k = rng.random_range(1..4);
            let x = DMatrix::from_fn(n, k, |_, j| if j == 0 { 1.0 } else { rng.random_range(-2.0..2.0) });
            let e: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let bw = rng.random_range(0..n.min(12));
            let v = hac_covariance(&x, &e, bw).unwrap();
            assert!((&v - v.transpose()).abs().max() < 1e-12);
            let eig = v.clone().symmetric_eigen().eigenvalues;
            let scale = eig.iter().fold(1.0f64, |m, e| m.max(e.abs()));
            assert!(eig.iter().all(|e| *e >= -1e-8 * scale), "{eig}");
        }
    }
}
