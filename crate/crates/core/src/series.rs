//! Hourly time series and the statistics built on them: sample ACF/PACF,
//! conditional-least-squares AR fitting, AR simulation, differencing,
//! shuffling and lag-matrix construction.

use std::fmt::Write as _;
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDateTime};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;

/// Timestamp format used when writing series and panels.
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// An ordered sequence of hourly observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<f64>,
    start: Option<NaiveDateTime>,
    label: String,
}

impl TimeSeries {
    /// Builds a series, rejecting empty input and non-finite values.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidSeries("series must hold at least one value".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!("value at index {i} is not finite ({})", values[i])));
        }
        Ok(Self { values, start: None, label: String::new() })
    }

    pub fn with_start(mut self, start: Option<NaiveDateTime>) -> Self {
        self.start = start;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn start(&self) -> Option<NaiveDateTime> {
        self.start
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false for a constructed series; provided for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Timestamp of observation `index`, if the series carries a start.
    pub fn timestamp(&self, index: usize) -> Option<NaiveDateTime> {
        self.start.map(|s| s + Duration::hours(index as i64))
    }

    pub fn mean(&self) -> f64 {
        mean(&self.values)
    }

    /// Sample variance with the `n - 1` denominator (0 for a single value).
    pub fn variance(&self) -> f64 {
        sample_variance(&self.values)
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Drops the first `n` observations, shifting the start timestamp.
    pub fn skip(&self, n: usize) -> Result<Self> {
        if n >= self.len() {
            return Err(Error::TooShort { required: n + 1, actual: self.len() });
        }
        Ok(Self { values: self.values[n..].to_vec(), start: self.timestamp(n), label: self.label.clone() })
    }

    /// Keeps the first `n` observations.
    pub fn truncate(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.len() {
            return Err(Error::TooShort { required: n.max(1), actual: self.len() });
        }
        Ok(Self { values: self.values[..n].to_vec(), start: self.start, label: self.label.clone() })
    }

    /// Serializes as `timestamp,value` rows (or a bare `value` column when the
    /// series has no start timestamp).
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 32);
        match self.start {
            Some(_) => {
                out.push_str("timestamp,value\n");
                for (i, v) in self.values.iter().enumerate() {
                    let ts = self.timestamp(i).expect("start present");
                    let _ = writeln!(out, "{},{}", ts.format(TIMESTAMP_FORMAT), v);
                }
            }
            None => {
                out.push_str("value\n");
                for v in &self.values {
                    let _ = writeln!(out, "{v}");
                }
            }
        }
        out
    }

    /// Parses the two-column `timestamp,value` format, a single `value` column
    /// with header, or headerless values one per line.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let records = parse_records(text)?;
        series_from_records(&records)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Ok(Self::from_csv_str(&text)?.with_label(label))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// One parsed data row of a series file. `row` is the 1-based line number.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Record {
    pub row: usize,
    pub timestamp: Option<NaiveDateTime>,
    pub value: f64,
}

pub(crate) fn parse_timestamp(text: &str) -> Option<NaiveDateTime> {
    let text = text.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
        return Some(dt.naive_utc());
    }
    let text = text.trim_end_matches('Z');
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(text, fmt).ok())
}

fn parse_value(field: &str, row: usize) -> Result<f64> {
    let field = field.trim();
    if field.is_empty() {
        return Err(Error::Parse { row, message: "empty value".into() });
    }
    let v: f64 =
        field.parse().map_err(|_| Error::Parse { row, message: format!("cannot parse `{field}` as a number") })?;
    if !v.is_finite() {
        return Err(Error::Parse { row, message: format!("non-finite value `{field}`") });
    }
    Ok(v)
}

/// Reads records and checks that timestamps, when present, strictly increase.
pub(crate) fn parse_records(text: &str) -> Result<Vec<Record>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let Some((first_row, first)) = lines.by_ref().find(|(_, l)| !l.trim().is_empty()) else {
        return Err(Error::InvalidSeries("file contains no data".into()));
    };

    let header: Vec<String> = first.split(',').map(|h| h.trim().to_ascii_lowercase()).collect();
    let (with_timestamp, pending) = match header.as_slice() {
        [t, v] if t == "timestamp" && v == "value" => (true, None),
        [v] if v == "value" => (false, None),
        [v] if v.parse::<f64>().is_ok() || v == "nan" || v.contains("inf") => (false, Some((first_row, first))),
        _ => {
            return Err(Error::Parse {
                row: first_row,
                message: format!("unrecognized header `{first}` (expected `timestamp,value`)"),
            })
        }
    };

    let mut records = Vec::new();
    for (row, line) in pending.into_iter().chain(lines) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let record = if with_timestamp {
            if fields.len() != 2 {
                return Err(Error::Parse { row, message: format!("expected 2 fields, found {}", fields.len()) });
            }
            let ts = parse_timestamp(fields[0]).ok_or_else(|| Error::Parse {
                row,
                message: format!("cannot parse timestamp `{}`", fields[0].trim()),
            })?;
            Record { row, timestamp: Some(ts), value: parse_value(fields[1], row)? }
        } else {
            if fields.len() != 1 {
                return Err(Error::Parse { row, message: format!("expected 1 field, found {}", fields.len()) });
            }
            Record { row, timestamp: None, value: parse_value(fields[0], row)? }
        };
        if let (Some(prev), Some(ts)) = (records.last().and_then(|r: &Record| r.timestamp), record.timestamp) {
            if ts <= prev {
                return Err(Error::Parse {
                    row,
                    message: format!("timestamp {ts} does not increase (previous {prev})"),
                });
            }
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::InvalidSeries("file contains a header but no data rows".into()));
    }
    Ok(records)
}

pub(crate) fn series_from_records(records: &[Record]) -> Result<TimeSeries> {
    let values = records.iter().map(|r| r.value).collect();
    Ok(TimeSeries::new(values)?.with_start(records.first().and_then(|r| r.timestamp)))
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub(crate) fn sample_variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64
}

/// Table-style summary of one series: moments, range and AR(2) lag coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub ar_lag1: f64,
    pub ar_lag2: f64,
}

impl SeriesSummary {
    pub const HEADER: &'static str = "count,mean,std,min,max,ar_lag1,ar_lag2";

    pub fn of(series: &TimeSeries) -> Result<Self> {
        let ar = fit_ar(series, 2)?;
        Ok(Self {
            count: series.len(),
            mean: series.mean(),
            std: series.std_dev(),
            min: series.min(),
            max: series.max(),
            ar_lag1: ar.coefficients()[0],
            ar_lag2: ar.coefficients()[1],
        })
    }

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{},{},{}", self.count, self.mean, self.std, self.min, self.max, self.ar_lag1, self.ar_lag2)
    }
}

/// Autoregressive model `x_t = intercept + sum_l coefficients[l-1] * x_{t-l} + e_t`
/// with `e_t ~ N(0, innovation_variance)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArModel {
    intercept: f64,
    coefficients: Vec<f64>,
    innovation_variance: f64,
}

impl ArModel {
    pub fn new(intercept: f64, coefficients: Vec<f64>, innovation_variance: f64) -> Result<Self> {
        if !intercept.is_finite() || coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("AR parameters must be finite".into()));
        }
        if !(innovation_variance >= 0.0 && innovation_variance.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "innovation variance must be a non-negative number, got {innovation_variance}"
            )));
        }
        Ok(Self { intercept, coefficients, innovation_variance })
    }

    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn innovation_variance(&self) -> f64 {
        self.innovation_variance
    }

    /// All roots of `1 - a_1 z - ... - a_L z^L` lie outside the unit circle.
    pub fn is_stationary(&self) -> bool {
        is_stationary(&self.coefficients)
    }

    /// `intercept / (1 - sum(coefficients))`.
    pub fn unconditional_mean(&self) -> f64 {
        self.intercept / (1.0 - self.coefficients.iter().sum::<f64>())
    }

    /// Variance of the stationary distribution, from the Yule-Walker system
    /// for the autocovariances `gamma_0..gamma_L`.
    pub fn stationary_variance(&self) -> Result<f64> {
        if !self.is_stationary() {
            return Err(Error::NonStationary(format!("coefficients {:?}", self.coefficients)));
        }
        Ok(self.innovation_variance * unit_stationary_variance(&self.coefficients))
    }
}

/// Stationary variance of an AR process with unit innovation variance.
pub(crate) fn unit_stationary_variance(coefficients: &[f64]) -> f64 {
    let p = coefficients.len();
    if p == 0 {
        return 1.0;
    }
    // Unknowns gamma_0..gamma_p:
    //   gamma_0 - sum_i a_i gamma_i = 1
    //   gamma_k - sum_i a_i gamma_{|k-i|} = 0     (k = 1..p)
    let mut a = DMatrix::<f64>::zeros(p + 1, p + 1);
    let mut b = DVector::<f64>::zeros(p + 1);
    b[0] = 1.0;
    for k in 0..=p {
        a[(k, k)] += 1.0;
        for (i, coef) in coefficients.iter().enumerate() {
            let lag = i + 1;
            let idx = (k as isize - lag as isize).unsigned_abs();
            a[(k, idx)] -= coef;
        }
    }
    a.lu().solve(&b).map_or(f64::INFINITY, |g| g[0])
}

pub(crate) fn is_stationary(coefficients: &[f64]) -> bool {
    let p = coefficients.len();
    if p == 0 {
        return true;
    }
    let companion = DMatrix::from_fn(p, p, |i, j| {
        if i == 0 {
            coefficients[j]
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    companion.complex_eigenvalues().iter().all(|z| z.norm() < 1.0 - 1e-12)
}

fn check_length(series: &TimeSeries, required: usize) -> Result<()> {
    if series.len() < required {
        return Err(Error::TooShort { required, actual: series.len() });
    }
    Ok(())
}

/// Sample autocorrelations at lags `1..=max_lag`, using deviations from the
/// sample mean and the lag-0 sum of squares as the common denominator.
pub fn acf(series: &TimeSeries, max_lag: usize) -> Result<Vec<f64>> {
    if max_lag == 0 {
        return Err(Error::InvalidParameter("max_lag must be positive".into()));
    }
    check_length(series, max_lag + 2)?;
    let m = series.mean();
    let dev: Vec<f64> = series.values().iter().map(|v| v - m).collect();
    let ss0: f64 = dev.iter().map(|d| d * d).sum();
    if ss0 == 0.0 {
        return Err(Error::InvalidSeries("autocorrelation undefined for a constant series".into()));
    }
    Ok((1..=max_lag).map(|k| dev[k..].iter().zip(&dev).map(|(a, b)| a * b).sum::<f64>() / ss0).collect())
}

/// Partial autocorrelations at lags `1..=max_lag`: entry `k - 1` is the lag-`k`
/// coefficient of an order-`k` conditional least-squares AR fit.
pub fn pacf(series: &TimeSeries, max_lag: usize) -> Result<Vec<f64>> {
    if max_lag == 0 {
        return Err(Error::InvalidParameter("max_lag must be positive".into()));
    }
    check_length(series, max_lag + 2)?;
    (1..=max_lag).into_par_iter().map(|k| fit_ar(series, k).map(|m| m.coefficients[k - 1])).collect()
}

/// Conditional least squares: regress `x_t` on an intercept and
/// `x_{t-1}..x_{t-order}` over every `t` with all lags available. The
/// innovation variance is `RSS / (n - order - 1)`, so order 0 returns the
/// sample mean and sample variance.
pub fn fit_ar(series: &TimeSeries, order: usize) -> Result<ArModel> {
    check_length(series, order + 3)?;
    if order == 0 {
        return ArModel::new(series.mean(), Vec::new(), series.variance());
    }
    let lags: Vec<usize> = (1..=order).collect();
    let lm = lag_matrix(series, &lags)?;
    let target = lm.target(series);
    let n = target.len();

    let mut x = DMatrix::<f64>::from_element(n, order + 1, 1.0);
    x.columns_mut(1, order).copy_from(&lm.data);
    let mut names = vec!["const".to_string()];
    names.extend(lags.iter().map(|l| format!("lag{l}")));
    let ls = linalg::least_squares(&x, target, &names)?;

    let variance = (ls.rss() / (n - order - 1) as f64).max(0.0);
    ArModel::new(ls.coefficients[0], ls.coefficients[1..].to_vec(), variance)
}

/// Simulates `length` values of a stationary AR model.
///
/// `initial` holds the `order` pre-sample values in chronological order
/// (`x_{-L}, ..., x_{-1}`); by default every pre-sample value is the
/// unconditional mean.
pub fn simulate_ar(model: &ArModel, length: usize, seed: u64, initial: Option<&[f64]>) -> Result<TimeSeries> {
    if length == 0 {
        return Err(Error::InvalidParameter("length must be positive".into()));
    }
    if !model.is_stationary() {
        return Err(Error::NonStationary(format!("coefficients {:?}", model.coefficients)));
    }
    let order = model.order();
    let mut history: Vec<f64> = match initial {
        Some(init) if init.len() != order => return Err(Error::LagMismatch { expected: order, actual: init.len() }),
        Some(init) => init.to_vec(),
        None => vec![model.unconditional_mean(); order],
    };
    history.reserve(length);

    let noise =
        Normal::new(0.0, model.innovation_variance.sqrt()).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = rng::rng_from_seed(seed);
    for _ in 0..length {
        let t = history.len();
        let ar: f64 = model.coefficients.iter().enumerate().map(|(i, a)| a * history[t - 1 - i]).sum();
        history.push(model.intercept + ar + noise.sample(&mut rng));
    }
    TimeSeries::new(history.split_off(order))
}

/// First difference: `out_t = x_{t+1} - x_t`, one observation shorter.
pub fn difference(series: &TimeSeries) -> Result<TimeSeries> {
    check_length(series, 2)?;
    let values = series.values().windows(2).map(|w| w[1] - w[0]).collect();
    Ok(TimeSeries::new(values)?.with_start(series.timestamp(1)).with_label(series.label()))
}

/// Uniformly random permutation of the values. The start timestamp is kept.
pub fn shuffle(series: &TimeSeries, seed: u64) -> TimeSeries {
    let mut values = series.values().to_vec();
    values.shuffle(&mut rng::rng_from_seed(seed));
    TimeSeries { values, start: series.start, label: series.label.clone() }
}

/// Lagged copies of a series aligned on a common time index.
///
/// Row `r` corresponds to time `t = first_time + r` with
/// `first_time = max(lags)`; column `j` holds `x_{t - lags[j]}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagMatrix {
    pub lags: Vec<usize>,
    pub first_time: usize,
    pub data: DMatrix<f64>,
}

impl LagMatrix {
    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    /// Contemporaneous values `x_t` for the aligned rows.
    pub fn target<'a>(&self, series: &'a TimeSeries) -> &'a [f64] {
        &series.values()[self.first_time..]
    }
}

/// Builds the lag matrix for the given set of positive lags (duplicates are
/// collapsed, order ascending).
pub fn lag_matrix(series: &TimeSeries, lags: &[usize]) -> Result<LagMatrix> {
    let mut lags = lags.to_vec();
    lags.sort_unstable();
    lags.dedup();
    if lags.first() == Some(&0) {
        return Err(Error::InvalidParameter("lags must be positive".into()));
    }
    let max_lag = lags.last().copied().unwrap_or(0);
    if max_lag >= series.len() {
        return Err(Error::TooShort { required: max_lag + 1, actual: series.len() });
    }
    let x = series.values();
    let nrows = series.len() - max_lag;
    let data = DMatrix::from_fn(nrows, lags.len(), |r, j| x[max_lag + r - lags[j]]);
    Ok(LagMatrix { lags, first_time: max_lag, data })
}
