use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("series too short: need at least {required} observations, got {actual}")]
    TooShort { required: usize, actual: usize },

    #[error("rank deficient design: column `{column}` is collinear with the preceding columns")]
    RankDeficient { column: String },

    #[error("non-stationary autoregressive model: {0}")]
    NonStationary(String),

    #[error("degenerate equilibrium: supply and demand slopes coincide at {slope}")]
    DegenerateEquilibrium { slope: f64 },

    #[error("expected {expected} demand lags, got {actual}")]
    LagMismatch { expected: usize, actual: usize },

    #[error("simulation unstable at step {step}: demand reached {value}")]
    Unstable { step: usize, value: f64 },

    #[error("bias prediction undefined: coefficient-sum product {product} is outside (-1, 1)")]
    BiasPole { product: f64 },

    #[error("HAC bandwidth {bandwidth} must be smaller than the sample size {nobs}")]
    Bandwidth { bandwidth: usize, nobs: usize },

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable short identifier used by the command line for machine-readable errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidSeries(_) => "invalid_series",
            Error::TooShort { .. } => "too_short",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::NonStationary(_) => "non_stationary",
            Error::DegenerateEquilibrium { .. } => "degenerate_equilibrium",
            Error::LagMismatch { .. } => "lag_mismatch",
            Error::Unstable { .. } => "unstable",
            Error::BiasPole { .. } => "bias_pole",
            Error::Bandwidth { .. } => "bandwidth",
            Error::Parse { .. } => "parse",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::UnknownExperiment(_) => "unknown_experiment",
            Error::Io(_) => "io",
        }
    }
}
