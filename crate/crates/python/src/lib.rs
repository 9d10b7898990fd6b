//! Python bindings for the simulation and estimation toolkit.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use elasticity_core::bias;
use elasticity_core::estimators::{self, Bandwidth, StrategyKind, StrategySpec};
use elasticity_core::harness::{self, ExperimentOverrides, ScenarioConfig};
use elasticity_core::market::EquilibriumPanel;
use elasticity_core::series::{self, TimeSeries};
use elasticity_core::wind::WindKind;
use elasticity_core::Error;

create_exception!(elasticity_lab, ElasticityError, PyException);

fn err(e: Error) -> PyErr {
    ElasticityError::new_err(format!("[{}] {e}", e.kind()))
}

fn bandwidth(value: Option<usize>) -> Bandwidth {
    value.map(Bandwidth::Fixed).unwrap_or_default()
}

/// Hourly wind, price and demand series of one simulated market.
#[pyclass(name = "Panel", module = "elasticity_lab", frozen)]
struct PyPanel {
    inner: EquilibriumPanel,
}

#[pymethods]
impl PyPanel {
    #[new]
    fn new(wind: Vec<f64>, price: Vec<f64>, demand: Vec<f64>) -> PyResult<Self> {
        let series = |v| TimeSeries::new(v).map_err(err);
        let inner = EquilibriumPanel::new(series(wind)?, series(price)?, series(demand)?).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        Ok(Self { inner: EquilibriumPanel::read(path).map_err(err)? })
    }

    fn write(&self, path: &str) -> PyResult<()> {
        self.inner.write(path).map_err(err)
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    #[getter]
    fn wind(&self) -> Vec<f64> {
        self.inner.wind().values().to_vec()
    }

    #[getter]
    fn price(&self) -> Vec<f64> {
        self.inner.price().values().to_vec()
    }

    #[getter]
    fn demand(&self) -> Vec<f64> {
        self.inner.demand().values().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Panel(len={})", self.inner.len())
    }
}

/// Slope estimate with its HAC standard error and 95% interval.
#[pyclass(name = "Estimate", module = "elasticity_lab", frozen, get_all)]
struct PyEstimate {
    strategy: String,
    slope: f64,
    std_error: f64,
    ci_low: f64,
    ci_high: f64,
    first_stage_f: Option<f64>,
    nobs: usize,
    weak_instrument: bool,
}

#[pymethods]
impl PyEstimate {
    fn covers(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }

    fn __repr__(&self) -> String {
        format!(
            "Estimate(strategy={:?}, slope={}, std_error={}, nobs={})",
            self.strategy, self.slope, self.std_error, self.nobs
        )
    }
}

impl From<estimators::EstimationResult> for PyEstimate {
    fn from(r: estimators::EstimationResult) -> Self {
        Self {
            strategy: r.strategy.kind.to_string(),
            slope: r.slope,
            std_error: r.std_error,
            ci_low: r.ci_low,
            ci_high: r.ci_high,
            first_stage_f: r.first_stage_f,
            nobs: r.nobs,
            weak_instrument: r.weak_instrument,
        }
    }
}

/// Simulates one scenario; `wind` takes the command-line forms
/// `surrogate`, `ar1:ALPHA`, `empirical:PATH` or `shuffled:...`.
#[pyfunction]
#[pyo3(signature = (demand_order, beta, wind = "surrogate", seed = harness::DEFAULT_SEED, demand_ar = None, length = None, burn_in = None))]
fn simulate(
    demand_order: usize,
    beta: f64,
    wind: &str,
    seed: u64,
    demand_ar: Option<Vec<f64>>,
    length: Option<usize>,
    burn_in: Option<usize>,
) -> PyResult<PyPanel> {
    let mut config = ScenarioConfig::new(demand_order, beta, WindKind::parse(wind).map_err(err)?).with_seed(seed);
    if let Some(ar) = demand_ar {
        config = config.with_demand_ar(ar);
    }
    config.length = length.unwrap_or(config.length);
    config.burn_in = burn_in.unwrap_or(config.burn_in);
    Ok(PyPanel { inner: harness::run_scenario(&config).map_err(err)? })
}

/// Estimates the demand slope; `m` sets the wind lags of conditional_iv and
/// `lags` the demand lags of nuisance_iv.
#[pyfunction]
#[pyo3(signature = (panel, strategy, m = None, lags = None, bandwidth = None))]
fn estimate(
    panel: &PyPanel,
    strategy: &str,
    m: Option<usize>,
    lags: Option<usize>,
    bandwidth: Option<usize>,
) -> PyResult<PyEstimate> {
    let kind = StrategyKind::from_name(strategy, m, lags).map_err(err)?;
    let spec = StrategySpec::new(kind).with_bandwidth(self::bandwidth(bandwidth));
    Ok(estimators::estimate(&spec, &panel.inner).map_err(err)?.into())
}

fn prediction<'py>(py: Python<'py>, p: bias::BiasPrediction) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("beta", p.true_slope)?;
    d.set_item("pred_estimate", p.predicted_estimate)?;
    d.set_item("inflation", p.inflation_factor)?;
    d.set_item("demand_ar_sum", p.demand_ar_sum)?;
    d.set_item("instrument_ar_sum", p.instrument_ar_sum)?;
    Ok(d)
}

#[pyfunction]
fn thams_bias_ar1<'py>(
    py: Python<'py>,
    beta: f64,
    alpha_instrument: f64,
    alpha_dependent: f64,
) -> PyResult<Bound<'py, PyDict>> {
    prediction(py, bias::thams_bias_ar1(beta, alpha_instrument, alpha_dependent).map_err(err)?)
}

#[pyfunction]
fn thams_bias_general<'py>(
    py: Python<'py>,
    beta: f64,
    demand_ar: Vec<f64>,
    instrument_ar: Vec<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    prediction(py, bias::thams_bias_general(beta, &demand_ar, &instrument_ar).map_err(err)?)
}

/// Returns `(intercept, coefficients, innovation_variance)`.
#[pyfunction]
fn fit_ar(values: Vec<f64>, order: usize) -> PyResult<(f64, Vec<f64>, f64)> {
    let model = series::fit_ar(&TimeSeries::new(values).map_err(err)?, order).map_err(err)?;
    Ok((model.intercept(), model.coefficients().to_vec(), model.innovation_variance()))
}

#[pyfunction]
fn acf(values: Vec<f64>, max_lag: usize) -> PyResult<Vec<f64>> {
    series::acf(&TimeSeries::new(values).map_err(err)?, max_lag).map_err(err)
}

/// Partial autocorrelations at lags 1..=max_lag.
#[pyfunction]
fn pacf(values: Vec<f64>, max_lag: usize) -> PyResult<Vec<f64>> {
    series::pacf(&TimeSeries::new(values).map_err(err)?, max_lag).map_err(err)
}

/// Runs a named experiment and returns its estimation rows as dicts.
#[pyfunction]
#[pyo3(signature = (id, seed = None, length = None, burn_in = None))]
fn run_experiment<'py>(
    py: Python<'py>,
    id: &str,
    seed: Option<u64>,
    length: Option<usize>,
    burn_in: Option<usize>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let overrides = ExperimentOverrides { seed, length, burn_in, ..Default::default() };
    let result = py.detach(|| harness::run_named_experiment(id, &overrides)).map_err(err)?;
    result
        .estimates
        .into_iter()
        .map(|row| {
            let d = PyDict::new(py);
            d.set_item("scenario", row.scenario.label())?;
            d.set_item("true_slope", row.true_slope)?;
            d.set_item("strategy", row.result.strategy.kind.to_string())?;
            d.set_item("slope", row.result.slope)?;
            d.set_item("std_error", row.result.std_error)?;
            d.set_item("ci_low", row.result.ci_low)?;
            d.set_item("ci_high", row.result.ci_high)?;
            d.set_item("first_stage_f", row.result.first_stage_f)?;
            d.set_item("nobs", row.result.nobs)?;
            d.set_item("note", row.note)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn elasticity_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ElasticityError", m.py().get_type::<ElasticityError>())?;
    m.add_class::<PyPanel>()?;
    m.add_class::<PyEstimate>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(thams_bias_ar1, m)?)?;
    m.add_function(wrap_pyfunction!(thams_bias_general, m)?)?;
    m.add_function(wrap_pyfunction!(fit_ar, m)?)?;
    m.add_function(wrap_pyfunction!(acf, m)?)?;
    m.add_function(wrap_pyfunction!(pacf, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
