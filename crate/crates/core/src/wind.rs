//! Wind-speed providers: an empirical file, an AR(2) surrogate calibrated to
//! the Danish summary statistics, a synthetic AR(1) series and a shuffled
//! version of any of these.

use std::fmt;
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::series::{self, ArModel, TimeSeries};

/// Start of the hourly sample used for generated wind series.
pub const DEFAULT_START: &str = "2019-01-01T00:00:00";

/// Default lag-1 coefficient of the synthetic AR(1) wind.
pub const DEFAULT_SYNTHETIC_ALPHA: f64 = 0.95;

pub(crate) fn default_start() -> NaiveDateTime {
    series::parse_timestamp(DEFAULT_START).expect("valid constant")
}

/// Target moments and AR structure of the surrogate wind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateCalibration {
    pub target_mean: f64,
    pub target_std: f64,
    pub ar_coefficients: [f64; 2],
    pub clip_low: f64,
    pub clip_high: f64,
}

impl Default for SurrogateCalibration {
    /// Hourly Danish wind speed, m/s: mean 7.6, std 2.4, range [2.2, 18.3],
    /// AR(2) lags (1.84, -0.85).
    fn default() -> Self {
        Self { target_mean: 7.6, target_std: 2.4, ar_coefficients: [1.84, -0.85], clip_low: 2.2, clip_high: 18.3 }
    }
}

impl SurrogateCalibration {
    pub fn validate(&self) -> Result<()> {
        if !series::is_stationary(&self.ar_coefficients) {
            return Err(Error::NonStationary(format!("surrogate coefficients {:?}", self.ar_coefficients)));
        }
        if !(self.target_std > 0.0) {
            return Err(Error::InvalidParameter("surrogate std must be positive".into()));
        }
        if !(0.0 < self.clip_low && self.clip_low < self.target_mean && self.target_mean < self.clip_high) {
            return Err(Error::InvalidParameter(format!(
                "surrogate bounds must satisfy 0 < low < mean < high, got {} / {} / {}",
                self.clip_low, self.target_mean, self.clip_high
            )));
        }
        Ok(())
    }

    /// AR(2) model whose unclipped stationary mean and standard deviation
    /// match the targets.
    pub fn ar_model(&self) -> Result<ArModel> {
        self.validate()?;
        let coefs = self.ar_coefficients.to_vec();
        let unit_var = series::unit_stationary_variance(&coefs);
        let innovation_variance = self.target_std * self.target_std / unit_var;
        let intercept = self.target_mean * (1.0 - coefs.iter().sum::<f64>());
        ArModel::new(intercept, coefs, innovation_variance)
    }
}

/// Which wind series to provide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WindKind {
    Empirical { path: PathBuf },
    Surrogate { calibration: SurrogateCalibration },
    SyntheticAr1 { alpha: f64, mean: f64, std: f64 },
    Shuffled { of: Box<WindKind> },
}

impl WindKind {
    pub fn surrogate() -> Self {
        WindKind::Surrogate { calibration: SurrogateCalibration::default() }
    }

    /// Synthetic AR(1) wind with the surrogate's mean and standard deviation.
    pub fn synthetic_ar1(alpha: f64) -> Self {
        let cal = SurrogateCalibration::default();
        WindKind::SyntheticAr1 { alpha, mean: cal.target_mean, std: cal.target_std }
    }

    pub fn shuffled(of: WindKind) -> Self {
        WindKind::Shuffled { of: Box::new(of) }
    }

    /// Autoregressive coefficients of the generating process, where known.
    pub fn true_ar_coefficients(&self) -> Option<Vec<f64>> {
        match self {
            WindKind::Surrogate { calibration } => Some(calibration.ar_coefficients.to_vec()),
            WindKind::SyntheticAr1 { alpha, .. } => Some(vec![*alpha]),
            WindKind::Shuffled { .. } => Some(vec![]),
            WindKind::Empirical { .. } => None,
        }
    }

    /// Parses the command-line form: `surrogate`, `ar1:ALPHA`,
    /// `empirical:PATH` or `shuffled:<inner>`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let (head, rest) = match text.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (text, None),
        };
        match (head, rest) {
            ("surrogate", None) => Ok(Self::surrogate()),
            ("ar1", None) => Ok(Self::synthetic_ar1(DEFAULT_SYNTHETIC_ALPHA)),
            ("ar1", Some(a)) => {
                let alpha =
                    a.parse().map_err(|_| Error::InvalidParameter(format!("cannot parse AR(1) coefficient `{a}`")))?;
                Ok(Self::synthetic_ar1(alpha))
            }
            ("empirical", Some(p)) if !p.is_empty() => Ok(WindKind::Empirical { path: PathBuf::from(p) }),
            ("shuffled", None) => Ok(Self::shuffled(Self::surrogate())),
            ("shuffled", Some(inner)) => Ok(Self::shuffled(Self::parse(inner)?)),
            _ => Err(Error::InvalidParameter(format!(
                "unknown wind spec `{text}` (expected surrogate, ar1:ALPHA, empirical:PATH or shuffled:...)"
            ))),
        }
    }
}

impl fmt::Display for WindKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WindKind::Empirical { path } => write!(f, "empirical:{}", path.display()),
            WindKind::Surrogate { calibration } if *calibration == SurrogateCalibration::default() => {
                write!(f, "surrogate")
            }
            WindKind::Surrogate { calibration } => write!(
                f,
                "surrogate({},{};{}±{};[{},{}])",
                calibration.ar_coefficients[0],
                calibration.ar_coefficients[1],
                calibration.target_mean,
                calibration.target_std,
                calibration.clip_low,
                calibration.clip_high
            ),
            WindKind::SyntheticAr1 { alpha, .. } => write!(f, "ar1:{alpha}"),
            WindKind::Shuffled { of } => write!(f, "shuffled:{of}"),
        }
    }
}

/// A wind provider request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindSpec {
    pub kind: WindKind,
    pub length: usize,
    pub seed: u64,
}

impl WindSpec {
    pub fn new(kind: WindKind, length: usize, seed: u64) -> Self {
        Self { kind, length, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::InvalidParameter("wind length must be positive".into()));
        }
        validate_kind(&self.kind)
    }

    /// Produces exactly `length` observations.
    pub fn generate(&self) -> Result<TimeSeries> {
        self.validate()?;
        generate_kind(&self.kind, self.length, self.seed)
    }
}

fn validate_kind(kind: &WindKind) -> Result<()> {
    match kind {
        WindKind::Empirical { .. } => Ok(()),
        WindKind::Surrogate { calibration } => calibration.validate(),
        WindKind::SyntheticAr1 { alpha, std, .. } => {
            if !(alpha.abs() < 1.0) {
                return Err(Error::NonStationary(format!("AR(1) wind coefficient {alpha}")));
            }
            if !(*std > 0.0) {
                return Err(Error::InvalidParameter("AR(1) wind std must be positive".into()));
            }
            Ok(())
        }
        WindKind::Shuffled { of } => validate_kind(of),
    }
}

fn generate_kind(kind: &WindKind, length: usize, seed: u64) -> Result<TimeSeries> {
    match kind {
        WindKind::Empirical { path } => {
            let wind = load_wind(path)?;
            if wind.len() < length {
                return Err(Error::TooShort { required: length, actual: wind.len() });
            }
            wind.truncate(length)
        }
        WindKind::Surrogate { calibration } => surrogate_wind(calibration, length, seed),
        WindKind::SyntheticAr1 { alpha, mean, std } => synthetic_ar1_wind(*alpha, *mean, *std, length, seed),
        WindKind::Shuffled { of } => {
            let base = generate_kind(of, length, rng::derive_seed(seed, 1))?;
            Ok(series::shuffle(&base, rng::derive_seed(seed, 2)).with_label(format!("shuffled {}", base.label())))
        }
    }
}

/// Reads an hourly wind-speed file in m/s. Rejects unparsable, empty,
/// negative and out-of-order rows, reporting the file row number.
pub fn load_wind(path: impl AsRef<Path>) -> Result<TimeSeries> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_wind(&text)
}

pub(crate) fn parse_wind(text: &str) -> Result<TimeSeries> {
    let records = series::parse_records(text)?;
    if let Some(r) = records.iter().find(|r| r.value < 0.0) {
        return Err(Error::Parse { row: r.row, message: format!("negative wind speed {}", r.value) });
    }
    Ok(series::series_from_records(&records)?.with_label("wind"))
}

/// Unclipped AR(2) surrogate wind.
pub fn surrogate_wind_unclipped(cal: &SurrogateCalibration, length: usize, seed: u64) -> Result<TimeSeries> {
    let model = cal.ar_model()?;
    Ok(series::simulate_ar(&model, length, seed, None)?.with_start(Some(default_start())).with_label("surrogate wind"))
}

/// AR(2) surrogate wind hard-clamped into `[clip_low, clip_high]`.
pub fn surrogate_wind(cal: &SurrogateCalibration, length: usize, seed: u64) -> Result<TimeSeries> {
    let raw = surrogate_wind_unclipped(cal, length, seed)?;
    clip(&raw, cal.clip_low, cal.clip_high)
}

/// Number of observations a clamp to `[low, high]` would alter.
pub fn clipped_count(series: &TimeSeries, low: f64, high: f64) -> usize {
    series.values().iter().filter(|v| **v < low || **v > high).count()
}

fn clip(series: &TimeSeries, low: f64, high: f64) -> Result<TimeSeries> {
    let values = series.values().iter().map(|v| v.clamp(low, high)).collect();
    Ok(TimeSeries::new(values)?.with_start(series.start()).with_label(series.label()))
}

/// Stationary AR(1) wind with the given lag-1 coefficient, mean and standard
/// deviation. The first value is drawn from the stationary distribution.
pub fn synthetic_ar1_wind(alpha: f64, mean: f64, std: f64, length: usize, seed: u64) -> Result<TimeSeries> {
    validate_kind(&WindKind::SyntheticAr1 { alpha, mean, std })?;
    let model = ArModel::new(mean * (1.0 - alpha), vec![alpha], std * std * (1.0 - alpha * alpha))?;
    let init = {
        use rand_distr::{Distribution, Normal};
        let normal = Normal::new(mean, std).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        normal.sample(&mut rng::rng_stream(seed, 1))
    };
    Ok(series::simulate_ar(&model, length, seed, Some(&[init]))?
        .with_start(Some(default_start()))
        .with_label(format!("ar1({alpha}) wind")))
}
