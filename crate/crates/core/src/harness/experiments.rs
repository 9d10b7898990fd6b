use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::{run_scenario, ScenarioConfig, DEFAULT_SEED, ELASTIC_SLOPE};
use crate::bias::{thams_bias_general, BiasPrediction};
use crate::error::{Error, Result};
use crate::estimators::{estimate, Bandwidth, EstimationResult, StrategyKind, StrategySpec};
use crate::market::EquilibriumPanel;
use crate::series::{fit_ar, SeriesSummary};
use crate::wind::{WindKind, DEFAULT_SYNTHETIC_ALPHA};

/// Demand AR(1) coefficients swept in `alpha-sweep`.
pub const ALPHA_GRID: [f64; 11] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95];

/// Demand AR(1) coefficients used for the bias-prediction comparison.
pub const BIAS_AR1_GRID: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 0.97];

/// Coefficient sums of the AR(2) demand variants in `bias-prediction`; each
/// rescales the tabulated (1.20, -0.24) pair, and 0.96 is the pair itself.
pub const BIAS_AR2_SUMS: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 0.96];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    Scatter,
    StrategyGrid,
    ConditionalSweep,
    WindVariants,
    AlphaSweep,
    BiasPrediction,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 6] = [
        ExperimentId::Scatter,
        ExperimentId::StrategyGrid,
        ExperimentId::ConditionalSweep,
        ExperimentId::WindVariants,
        ExperimentId::AlphaSweep,
        ExperimentId::BiasPrediction,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentId::Scatter => "scatter",
            ExperimentId::StrategyGrid => "strategy-grid",
            ExperimentId::ConditionalSweep => "conditional-sweep",
            ExperimentId::WindVariants => "wind-variants",
            ExperimentId::AlphaSweep => "alpha-sweep",
            ExperimentId::BiasPrediction => "bias-prediction",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .find(|id| id.name() == s.trim())
            .copied()
            .ok_or_else(|| Error::UnknownExperiment(s.to_string()))
    }
}

/// Optional changes to the experiment defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentOverrides {
    pub seed: Option<u64>,
    pub length: Option<usize>,
    pub burn_in: Option<usize>,
    pub target_mean_demand: Option<f64>,
    /// Replaces the surrogate as the "actual" wind.
    pub wind: Option<WindKind>,
    pub synthetic_wind_alpha: Option<f64>,
    /// Wind lags controlled for by conditional IV in grid experiments.
    pub conditional_lags: Option<usize>,
    /// Largest wind lag in `conditional-sweep`.
    pub sweep_max_lag: Option<usize>,
    pub nuisance_lags: Option<usize>,
    pub hac_bandwidth: Option<Bandwidth>,
}

/// Overrides resolved against the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSettings {
    pub seed: u64,
    pub length: usize,
    pub burn_in: usize,
    pub target_mean_demand: f64,
    pub wind: WindKind,
    pub synthetic_wind_alpha: f64,
    pub conditional_lags: usize,
    pub sweep_max_lag: usize,
    pub nuisance_lags: usize,
    pub hac_bandwidth: Bandwidth,
}

impl ExperimentOverrides {
    pub fn resolve(&self) -> ExperimentSettings {
        let base = ScenarioConfig::new(0, 0.0, WindKind::surrogate());
        ExperimentSettings {
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            length: self.length.unwrap_or(base.length),
            burn_in: self.burn_in.unwrap_or(base.burn_in),
            target_mean_demand: self.target_mean_demand.unwrap_or(base.target_mean_demand),
            wind: self.wind.clone().unwrap_or_else(WindKind::surrogate),
            synthetic_wind_alpha: self.synthetic_wind_alpha.unwrap_or(DEFAULT_SYNTHETIC_ALPHA),
            conditional_lags: self.conditional_lags.unwrap_or(26),
            sweep_max_lag: self.sweep_max_lag.unwrap_or(26),
            nuisance_lags: self.nuisance_lags.unwrap_or(2),
            hac_bandwidth: self.hac_bandwidth.unwrap_or_default(),
        }
    }
}

impl ExperimentSettings {
    fn scenario(&self, order: usize, beta: f64, wind: WindKind) -> ScenarioConfig {
        ScenarioConfig {
            target_mean_demand: self.target_mean_demand,
            seed: self.seed,
            burn_in: self.burn_in,
            length: self.length,
            ..ScenarioConfig::new(order, beta, wind)
        }
    }

    fn spec(&self, kind: StrategyKind) -> StrategySpec {
        StrategySpec::new(kind).with_bandwidth(self.hac_bandwidth)
    }

    fn all_strategies(&self) -> Vec<StrategySpec> {
        [
            StrategyKind::Ols,
            StrategyKind::LagpriceIv,
            StrategyKind::RegularIv,
            StrategyKind::RegularIvDiff,
            StrategyKind::ConditionalIv { wind_lags: self.conditional_lags },
            StrategyKind::NuisanceIv { demand_lags: self.nuisance_lags },
        ]
        .into_iter()
        .map(|k| self.spec(k))
        .collect()
    }

    fn synthetic_wind(&self) -> WindKind {
        WindKind::synthetic_ar1(self.synthetic_wind_alpha)
    }
}

/// One strategy applied to one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub scenario: ScenarioConfig,
    pub true_slope: f64,
    pub result: EstimationResult,
    pub note: Option<String>,
}

/// Measured regular-IV slope next to the closed-form predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasRow {
    pub scenario: ScenarioConfig,
    pub measured: EstimationResult,
    pub true_demand_ar: Vec<f64>,
    pub true_wind_ar: Vec<f64>,
    /// From the generating coefficients (`None` when unknown or at a pole).
    pub predicted_true: Option<BiasPrediction>,
    /// AR fits of the panel demand (same order as the generator) and wind.
    pub fitted_demand_ar: Vec<f64>,
    pub fitted_wind_ar: Vec<f64>,
    pub predicted_fitted: Option<BiasPrediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: ScenarioConfig,
    pub series: String,
    pub summary: SeriesSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentMetadata {
    pub experiment: ExperimentId,
    pub settings: ExperimentSettings,
    pub overrides: ExperimentOverrides,
    pub created: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub metadata: ExperimentMetadata,
    pub estimates: Vec<EstimateRow>,
    pub bias: Vec<BiasRow>,
    pub summaries: Vec<SummaryRow>,
    /// Simulated panels keyed by scenario label (only `scatter` emits them).
    #[serde(skip)]
    pub panels: Vec<(String, EquilibriumPanel)>,
}

/// Per-scenario work item evaluated in parallel.
struct Cell {
    scenario: ScenarioConfig,
    strategies: Vec<StrategySpec>,
    bias: Option<WindAr>,
    summaries: bool,
    keep_panel: bool,
}

/// Wind AR order to fit when predicting the bias, plus the generating
/// coefficients when known.
struct WindAr {
    fit_order: usize,
}

struct CellOutput {
    estimates: Vec<EstimateRow>,
    bias: Option<BiasRow>,
    summaries: Vec<SummaryRow>,
    panel: Option<(String, EquilibriumPanel)>,
}

impl Cell {
    fn new(scenario: ScenarioConfig, strategies: Vec<StrategySpec>) -> Self {
        Self { scenario, strategies, bias: None, summaries: false, keep_panel: false }
    }

    fn run(&self, settings: &ExperimentSettings, id: ExperimentId) -> Result<CellOutput> {
        let panel = run_scenario(&self.scenario)?;
        let true_slope = self.scenario.beta;

        let estimates = self
            .strategies
            .iter()
            .map(|spec| {
                let result = estimate(spec, &panel)?;
                let note = invalid_instrument_note(id, &self.scenario, spec);
                Ok(EstimateRow { scenario: self.scenario.clone(), true_slope, result, note })
            })
            .collect::<Result<Vec<_>>>()?;

        let bias = match &self.bias {
            Some(wind_ar) => Some(bias_row(&self.scenario, &panel, wind_ar, settings)?),
            None => None,
        };

        let summaries = if self.summaries {
            [("wind", panel.wind()), ("demand", panel.demand()), ("price", panel.price())]
                .into_iter()
                .map(|(name, s)| {
                    Ok(SummaryRow {
                        scenario: self.scenario.clone(),
                        series: name.into(),
                        summary: SeriesSummary::of(s)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };

        let panel = self.keep_panel.then(|| (self.scenario.label(), panel));
        Ok(CellOutput { estimates, bias, summaries, panel })
    }
}

fn invalid_instrument_note(id: ExperimentId, scenario: &ScenarioConfig, spec: &StrategySpec) -> Option<String> {
    let shuffled = matches!(scenario.wind, WindKind::Shuffled { .. });
    (id == ExperimentId::WindVariants && shuffled && spec.kind == StrategyKind::LagpriceIv)
        .then(|| "invalid_instrument: lagged price carries no wind persistence under shuffled wind".to_string())
}

fn bias_row(
    scenario: &ScenarioConfig,
    panel: &EquilibriumPanel,
    wind_ar: &WindAr,
    settings: &ExperimentSettings,
) -> Result<BiasRow> {
    let measured = estimate(&settings.spec(StrategyKind::RegularIv), panel)?;
    let true_demand_ar = scenario.demand_coefficients();
    let true_wind_ar = scenario.wind.true_ar_coefficients().unwrap_or_default();
    let predicted_true =
        scenario.wind.true_ar_coefficients().and_then(|w| thams_bias_general(scenario.beta, &true_demand_ar, &w).ok());

    let fitted_demand_ar = if scenario.demand_order == 0 {
        Vec::new()
    } else {
        fit_ar(panel.demand(), scenario.demand_order)?.coefficients().to_vec()
    };
    let fitted_wind_ar = if wind_ar.fit_order == 0 {
        Vec::new()
    } else {
        fit_ar(panel.wind(), wind_ar.fit_order)?.coefficients().to_vec()
    };
    let predicted_fitted = thams_bias_general(scenario.beta, &fitted_demand_ar, &fitted_wind_ar).ok();

    Ok(BiasRow {
        scenario: scenario.clone(),
        measured,
        true_demand_ar,
        true_wind_ar,
        predicted_true,
        fitted_demand_ar,
        fitted_wind_ar,
        predicted_fitted,
    })
}

fn wind_fit_order(kind: &WindKind) -> usize {
    match kind {
        WindKind::SyntheticAr1 { .. } => 1,
        WindKind::Shuffled { .. } => 0,
        _ => 2,
    }
}

fn the_six_scenarios(settings: &ExperimentSettings) -> Vec<ScenarioConfig> {
    [0.0, ELASTIC_SLOPE]
        .into_iter()
        .flat_map(|beta| (0..=2).map(move |order| (order, beta)))
        .map(|(order, beta)| settings.scenario(order, beta, settings.wind.clone()))
        .collect()
}

fn cells(id: ExperimentId, s: &ExperimentSettings) -> Result<Vec<Cell>> {
    let cells = match id {
        ExperimentId::Scatter => the_six_scenarios(s)
            .into_iter()
            .map(|sc| Cell { summaries: true, keep_panel: true, ..Cell::new(sc, Vec::new()) })
            .collect(),
        ExperimentId::StrategyGrid => {
            the_six_scenarios(s).into_iter().map(|sc| Cell::new(sc, s.all_strategies())).collect()
        }
        ExperimentId::ConditionalSweep => {
            if s.sweep_max_lag == 0 {
                return Err(Error::InvalidParameter("sweep_max_lag must be positive".into()));
            }
            let mut strategies: Vec<StrategySpec> =
                (1..=s.sweep_max_lag).map(|m| s.spec(StrategyKind::ConditionalIv { wind_lags: m })).collect();
            strategies.push(s.spec(StrategyKind::NuisanceIv { demand_lags: s.nuisance_lags }));
            vec![Cell::new(s.scenario(1, ELASTIC_SLOPE, s.wind.clone()), strategies)]
        }
        ExperimentId::WindVariants => [WindKind::shuffled(s.wind.clone()), s.synthetic_wind(), s.wind.clone()]
            .into_iter()
            .map(|wind| {
                let fit_order = wind_fit_order(&wind);
                Cell {
                    bias: Some(WindAr { fit_order }),
                    ..Cell::new(s.scenario(1, ELASTIC_SLOPE, wind), s.all_strategies())
                }
            })
            .collect(),
        ExperimentId::AlphaSweep => {
            let strategies: Vec<StrategySpec> = [
                StrategyKind::Ols,
                StrategyKind::RegularIv,
                StrategyKind::NuisanceIv { demand_lags: s.nuisance_lags },
                StrategyKind::ConditionalIv { wind_lags: s.conditional_lags },
            ]
            .into_iter()
            .map(|k| s.spec(k))
            .collect();
            ALPHA_GRID
                .iter()
                .map(|&a| {
                    Cell::new(s.scenario(1, ELASTIC_SLOPE, s.wind.clone()).with_demand_ar(vec![a]), strategies.clone())
                })
                .collect()
        }
        ExperimentId::BiasPrediction => {
            let mut out = Vec::new();
            for wind in [s.synthetic_wind(), s.wind.clone()] {
                let fit_order = wind_fit_order(&wind);
                let ar1 = BIAS_AR1_GRID.iter().map(|&a| vec![a]);
                let ar2 = BIAS_AR2_SUMS.iter().map(|&sum| vec![1.20 * sum / 0.96, -0.24 * sum / 0.96]);
                for coefficients in ar1.chain(ar2) {
                    let sc = s.scenario(coefficients.len(), ELASTIC_SLOPE, wind.clone()).with_demand_ar(coefficients);
                    out.push(Cell { bias: Some(WindAr { fit_order }), ..Cell::new(sc, Vec::new()) });
                }
            }
            out
        }
    };
    Ok(cells)
}

/// Runs one of the named experiments with a single seed.
pub fn run_experiment(id: ExperimentId, overrides: &ExperimentOverrides) -> Result<ExperimentResult> {
    let settings = overrides.resolve();
    let cells = cells(id, &settings)?;
    let outputs = cells.par_iter().map(|cell| cell.run(&settings, id)).collect::<Result<Vec<_>>>()?;

    let mut result = ExperimentResult {
        metadata: ExperimentMetadata {
            experiment: id,
            settings,
            overrides: overrides.clone(),
            created: chrono::Utc::now().to_rfc3339(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        estimates: Vec::new(),
        bias: Vec::new(),
        summaries: Vec::new(),
        panels: Vec::new(),
    };
    for out in outputs {
        result.estimates.extend(out.estimates);
        result.bias.extend(out.bias);
        result.summaries.extend(out.summaries);
        result.panels.extend(out.panel);
    }
    Ok(result)
}

/// Experiment by name.
pub fn run_named_experiment(id: &str, overrides: &ExperimentOverrides) -> Result<ExperimentResult> {
    run_experiment(id.parse()?, overrides)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short() -> ExperimentOverrides {
        ExperimentOverrides { length: Some(2400), burn_in: Some(200), ..Default::default() }
    }

    #[test]
    fn ids_parse() {
        for id in ExperimentId::ALL {
            assert_eq!(id.name().parse::<ExperimentId>().unwrap(), id);
        }
        assert!(matches!("figure-12".parse::<ExperimentId>(), Err(Error::UnknownExperiment(_))));
    }

    #[test]
    fn strategy_grid_has_36_rows() {
        let r = run_experiment(ExperimentId::StrategyGrid, &short()).unwrap();
        assert_eq!(r.estimates.len(), 36);
    }

    #[test]
    fn scatter_emits_panels_and_summaries() {
        let r = run_experiment(ExperimentId::Scatter, &short()).unwrap();
        assert_eq!(r.panels.len(), 6);
        assert_eq!(r.summaries.len(), 18);
        assert!(r.panels.iter().all(|(_, p)| p.len() == 2200));
    }

    #[test]
    fn cardinalities() {
        let o = ExperimentOverrides { sweep_max_lag: Some(4), ..short() };
        assert_eq!(run_experiment(ExperimentId::ConditionalSweep, &o).unwrap().estimates.len(), 5);
        let w = run_experiment(ExperimentId::WindVariants, &short()).unwrap();
        assert_eq!(w.estimates.len(), 18);
        assert_eq!(w.bias.len(), 3);
        let flagged: Vec<_> = w.estimates.iter().filter(|r| r.note.is_some()).collect();
        assert_eq!(flagged.len(), 1);
        assert_eq!(flagged[0].result.strategy.kind, StrategyKind::LagpriceIv);
        let b = run_experiment(ExperimentId::BiasPrediction, &short()).unwrap();
        assert_eq!(b.bias.len(), 2 * (BIAS_AR1_GRID.len() + BIAS_AR2_SUMS.len()));
        let a = run_experiment(ExperimentId::AlphaSweep, &short()).unwrap();
        assert_eq!(a.estimates.len(), ALPHA_GRID.len() * 4);
    }

    #[test]
    fn rows_are_rerunnable_from_their_scenario() {
        let r = run_experiment(ExperimentId::StrategyGrid, &short()).unwrap();
        let row = &r.estimates[20];
        let panel = run_scenario(&row.scenario).unwrap();
        let again = estimate(&row.result.strategy, &panel).unwrap();
        assert_eq!(again, row.result);
    }
}
