//! OLS and two-stage least squares with HAC inference.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::hac::{hac_with_bread, Bandwidth};
use crate::error::{Error, Result};
use crate::linalg::{self, LeastSquares};

/// Name given to the intercept, which every regression includes.
pub const INTERCEPT: &str = "const";

/// First-stage F statistics below this value flag a weak instrument.
pub const WEAK_INSTRUMENT_F: f64 = 10.0;

/// A named regressor column.
#[derive(Debug, Clone, Copy)]
pub struct Column<'a> {
    pub name: &'a str,
    pub values: &'a [f64],
}

impl<'a> Column<'a> {
    pub fn new(name: &'a str, values: &'a [f64]) -> Self {
        Self { name, values }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub nobs: usize,
    pub bandwidth: usize,
    pub first_stage: Option<Box<RegressionFit>>,
    /// F statistic of the excluded instruments in the first stage.
    pub first_stage_f: Option<f64>,
    pub weak_instrument: bool,
}

impl RegressionFit {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.coefficients[i])
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.covariance[i][i].max(0.0).sqrt())
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let k = self.names.len();
        DMatrix::from_fn(k, k, |i, j| self.covariance[i][j])
    }
}

fn check_rows(y: &[f64], columns: &[Column<'_>]) -> Result<()> {
    for c in columns {
        if c.values.len() != y.len() {
            return Err(Error::InvalidParameter(format!(
                "column `{}` has {} rows, expected {}",
                c.name,
                c.values.len(),
                y.len()
            )));
        }
    }
    Ok(())
}

fn with_intercept(columns: &[Column<'_>]) -> (DMatrix<f64>, Vec<String>) {
    let n = columns.first().map_or(0, |c| c.values.len());
    let ones = vec![1.0; n];
    let mut slices: Vec<&[f64]> = vec![&ones];
    slices.extend(columns.iter().map(|c| c.values));
    let mut names = vec![INTERCEPT.to_string()];
    names.extend(columns.iter().map(|c| c.name.to_string()));
    (linalg::design(&slices), names)
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn finish(
    names: Vec<String>,
    ls: LeastSquares,
    design: &DMatrix<f64>,
    residuals: Vec<f64>,
    bandwidth: Bandwidth,
) -> Result<RegressionFit> {
    let nobs = residuals.len();
    let bandwidth = bandwidth.resolve(nobs);
    let covariance = hac_with_bread(design, &residuals, bandwidth, &ls.xtx_inv)?;
    Ok(RegressionFit {
        names,
        coefficients: ls.coefficients,
        residuals,
        covariance: to_rows(&covariance),
        nobs,
        bandwidth,
        first_stage: None,
        first_stage_f: None,
        weak_instrument: false,
    })
}

/// Least squares of `y` on an intercept and `regressors`, HAC covariance.
pub fn ols(y: &[f64], regressors: &[Column<'_>], bandwidth: Bandwidth) -> Result<RegressionFit> {
    check_rows(y, regressors)?;
    if y.is_empty() {
        return Err(Error::TooShort { required: regressors.len() + 2, actual: 0 });
    }
    let (x, names) = with_intercept(regressors);
    let ls = linalg::least_squares(&x, y, &names)?;
    let residuals = ls.residuals.clone();
    finish(names, ls, &x, residuals, bandwidth)
}

/// Two-stage least squares.
///
/// Stage 1 regresses `endogenous` on intercept, instruments and exogenous
/// controls; stage 2 regresses `y` on intercept, fitted endogenous and the
/// same controls. The HAC covariance uses the stage-2 design with the
/// structural residuals `y - X b`, evaluated at the observed endogenous column.
pub fn tsls(
    y: &[f64],
    endogenous: Column<'_>,
    instruments: &[Column<'_>],
    exogenous: &[Column<'_>],
    bandwidth: Bandwidth,
) -> Result<RegressionFit> {
    if instruments.is_empty() {
        return Err(Error::InvalidParameter("2SLS needs at least one instrument".into()));
    }
    check_rows(y, &[endogenous])?;
    check_rows(y, instruments)?;
    check_rows(y, exogenous)?;

    let stage1_columns: Vec<Column<'_>> = instruments.iter().chain(exogenous).copied().collect();
    let first = ols(endogenous.values, &stage1_columns, bandwidth)?;
    let restricted_rss = if exogenous.is_empty() {
        let m = crate::series::mean(endogenous.values);
        endogenous.values.iter().map(|v| (v - m) * (v - m)).sum()
    } else {
        let (xr, names) = with_intercept(exogenous);
        linalg::least_squares(&xr, endogenous.values, &names)?.rss()
    };
    let rss: f64 = first.residuals.iter().map(|e| e * e).sum();
    let q = instruments.len() as f64;
    let df = (first.nobs - first.names.len()) as f64;
    let f_stat = if rss > 0.0 { ((restricted_rss - rss) / q) / (rss / df) } else { f64::INFINITY };

    let fitted: Vec<f64> = endogenous.values.iter().zip(&first.residuals).map(|(v, e)| v - e).collect();
    let mut second_columns = vec![Column::new(endogenous.name, &fitted)];
    second_columns.extend_from_slice(exogenous);
    let (xhat, names) = with_intercept(&second_columns);
    let ls = linalg::least_squares(&xhat, y, &names)?;

    let mut structural = vec![Column::new(endogenous.name, endogenous.values)];
    structural.extend_from_slice(exogenous);
    let (x, _) = with_intercept(&structural);
    let beta = nalgebra::DVector::from_column_slice(&ls.coefficients);
    let fitted_y = &x * &beta;
    let residuals: Vec<f64> = y.iter().zip(fitted_y.iter()).map(|(a, b)| a - b).collect();

    let mut fit = finish(names, ls, &xhat, residuals, bandwidth)?;
    fit.first_stage = Some(Box::new(first));
    fit.first_stage_f = Some(f_stat);
    fit.weak_instrument = !(f_stat >= WEAK_INSTRUMENT_F);
    Ok(fit)
}
