//! Least squares on top of an unpivoted Householder QR.
//!
//! Pivoting is deliberately absent: when column `j` is (numerically) a linear
//! combination of columns `0..j`, the diagonal entry `R[j, j]` collapses, which
//! lets rank errors name the offending column in the caller's order.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative size of `R[j, j]` against the column norm below which a column is
/// considered collinear with its predecessors.
const RANK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub(crate) struct LeastSquares {
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `(X'X)^{-1}`, computed from the triangular factor.
    pub xtx_inv: DMatrix<f64>,
}

impl LeastSquares {
    pub fn rss(&self) -> f64 {
        self.residuals.iter().map(|e| e * e).sum()
    }
}

/// Column-major design matrix from named columns of equal length.
pub(crate) fn design(columns: &[&[f64]]) -> DMatrix<f64> {
    let nrows = columns.first().map_or(0, |c| c.len());
    DMatrix::from_fn(nrows, columns.len(), |i, j| columns[j][i])
}

pub(crate) fn least_squares(x: &DMatrix<f64>, y: &[f64], names: &[String]) -> Result<LeastSquares> {
    let (n, k) = x.shape();
    debug_assert_eq!(names.len(), k);
    if y.len() != n {
        return Err(Error::InvalidParameter(format!("response has {} rows but design has {n}", y.len())));
    }
    if n < k + 1 {
        return Err(Error::TooShort { required: k + 1, actual: n });
    }

    let qr = x.clone().qr();
    let r = qr.r();
    for j in 0..k {
        let norm = x.column(j).norm();
        if norm == 0.0 || r[(j, j)].abs() <= RANK_TOLERANCE * norm {
            return Err(Error::RankDeficient { column: names[j].clone() });
        }
    }

    let mut qty = nalgebra::DVector::from_column_slice(y);
    qr.q_tr_mul(&mut qty);
    let rhs = qty.rows(0, k).into_owned();
    let beta = r.solve_upper_triangular(&rhs).ok_or_else(|| Error::RankDeficient { column: names[k - 1].clone() })?;

    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::RankDeficient { column: names[k - 1].clone() })?;
    let xtx_inv = &r_inv * r_inv.transpose();

    let fitted = x * &beta;
    let residuals = y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();

    Ok(LeastSquares { coefficients: beta.iter().copied().collect(), residuals, xtx_inv })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn solves_exact_system() {
        let ones = vec![1.0; 4];
        let x1 = vec![0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x1.iter().map(|v| 1.0 - 2.0 * v).collect();
        let fit = least_squares(&design(&[&ones, &x1]), &y, &names(2)).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((fit.coefficients[1] + 2.0).abs() < 1e-12);
        assert!(fit.rss() < 1e-20);
    }

    #[test]
    fn names_collinear_column() {
        let ones = vec![1.0; 5];
        let x1 = vec![1.0, 2.0, 4.0, 8.0, 3.0];
        let x2: Vec<f64> = x1.iter().map(|v| 3.0 * v + 1.0).collect();
        let err = least_squares(
            &design(&[&ones, &x1, &x2]),
            &[1.0, 2.0, 3.0, 4.0, 5.0],
            &["const".into(), "a".into(), "b".into()],
        )
        .unwrap_err();
        match err {
            Error::RankDeficient { column } => assert_eq!(column, "b"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn inverse_matches_direct_inverse() {
        let ones = vec![1.0; 6];
        let x1 = vec![0.3, -1.2, 2.0, 0.7, 1.1, -0.4];
        let x = design(&[&ones, &x1]);
        let fit = least_squares(&x, &[1.0, 0.0, 2.0, 1.0, 3.0, 0.5], &names(2)).unwrap();
        let direct = (x.transpose() * &x).try_inverse().unwrap();
        assert!((fit.xtx_inv - direct).abs().max() < 1e-12);
    }
}
