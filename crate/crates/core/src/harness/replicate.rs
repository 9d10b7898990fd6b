use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::experiments::{run_experiment, ExperimentId, ExperimentOverrides, ExperimentResult};
use crate::error::{Error, Result};
use crate::estimators::StrategySpec;
use crate::rng::derive_seed;

/// Replicated statistics of one (scenario, strategy) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAggregate {
    pub scenario: String,
    pub strategy: StrategySpec,
    pub true_slope: f64,
    pub mean_slope: f64,
    /// Sample standard deviation across replications; 0 when n = 1.
    pub std_slope: f64,
    pub coverage: f64,
    pub mean_std_error: f64,
    pub slopes: Vec<f64>,
    pub covered: Vec<bool>,
}

impl CellAggregate {
    pub const CSV_HEADER: &'static str =
        "scenario,strategy,true_slope,mean_slope,std_slope,coverage,mean_std_error,replications";

    pub fn replications(&self) -> usize {
        self.slopes.len()
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.scenario,
            self.strategy.kind,
            self.true_slope,
            self.mean_slope,
            self.std_slope,
            self.coverage,
            self.mean_std_error,
            self.replications()
        )
    }
}

/// Replicated measured and predicted slopes of one bias-prediction cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasAggregate {
    pub scenario: String,
    pub true_slope: f64,
    pub mean_measured: f64,
    pub std_measured: f64,
    /// Mean prediction from the generating coefficients (`None` if any draw lacks one).
    pub predicted_true: Option<f64>,
    pub mean_predicted_fitted: Option<f64>,
    pub mean_fitted_demand_ar_sum: f64,
    pub mean_fitted_wind_ar_sum: f64,
    pub measured: Vec<f64>,
}

impl BiasAggregate {
    pub const CSV_HEADER: &'static str = "scenario,true_slope,mean_measured,std_measured,predicted_true,mean_predicted_fitted,mean_fitted_demand_ar_sum,mean_fitted_wind_ar_sum,replications";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.scenario,
            self.true_slope,
            self.mean_measured,
            self.std_measured,
            opt(self.predicted_true),
            opt(self.mean_predicted_fitted),
            self.mean_fitted_demand_ar_sum,
            self.mean_fitted_wind_ar_sum,
            self.measured.len()
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicatedResult {
    pub experiment: ExperimentId,
    pub base_seed: u64,
    pub seeds: Vec<u64>,
    pub cells: Vec<CellAggregate>,
    pub bias: Vec<BiasAggregate>,
    #[serde(skip)]
    pub runs: Vec<ExperimentResult>,
}

impl ReplicatedResult {
    pub fn cell(&self, scenario: &str, strategy: &str) -> Option<&CellAggregate> {
        self.cells.iter().find(|c| c.scenario == scenario && c.strategy.kind.to_string() == strategy)
    }

    pub fn bias_cell(&self, scenario: &str) -> Option<&BiasAggregate> {
        self.bias.iter().find(|b| b.scenario == scenario)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn mean_opt(v: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Option<Vec<f64>> = v.collect();
    v.filter(|v| !v.is_empty()).map(|v| mean(&v))
}

/// Runs an experiment `n` times with seeds derived from `base_seed` and
/// aggregates every cell across the runs.
pub fn replicate(
    id: ExperimentId,
    overrides: &ExperimentOverrides,
    n: usize,
    base_seed: u64,
) -> Result<ReplicatedResult> {
    if n == 0 {
        return Err(Error::InvalidParameter("replications must be positive".into()));
    }
    let seeds: Vec<u64> = (0..n as u64).map(|i| derive_seed(base_seed, i)).collect();
    let runs = seeds
        .par_iter()
        .map(|&seed| run_experiment(id, &ExperimentOverrides { seed: Some(seed), ..overrides.clone() }))
        .collect::<Result<Vec<_>>>()?;

    let first = &runs[0];
    let cells = (0..first.estimates.len())
        .map(|i| {
            let rows: Vec<_> = runs.iter().map(|r| &r.estimates[i]).collect();
            let slopes: Vec<f64> = rows.iter().map(|r| r.result.slope).collect();
            let covered: Vec<bool> = rows.iter().map(|r| r.result.covers(r.true_slope)).collect();
            let errors: Vec<f64> = rows.iter().map(|r| r.result.std_error).collect();
            CellAggregate {
                scenario: rows[0].scenario.label(),
                strategy: rows[0].result.strategy,
                true_slope: rows[0].true_slope,
                mean_slope: mean(&slopes),
                std_slope: std(&slopes),
                coverage: covered.iter().filter(|&&c| c).count() as f64 / n as f64,
                mean_std_error: mean(&errors),
                slopes,
                covered,
            }
        })
        .collect();

    let bias = (0..first.bias.len())
        .map(|i| {
            let rows: Vec<_> = runs.iter().map(|r| &r.bias[i]).collect();
            let measured: Vec<f64> = rows.iter().map(|r| r.measured.slope).collect();
            let sums = |f: fn(&super::experiments::BiasRow) -> &Vec<f64>| {
                mean(&rows.iter().map(|r| f(r).iter().sum::<f64>()).collect::<Vec<_>>())
            };
            BiasAggregate {
                scenario: rows[0].scenario.label(),
                true_slope: rows[0].scenario.beta,
                mean_measured: mean(&measured),
                std_measured: std(&measured),
                predicted_true: mean_opt(rows.iter().map(|r| r.predicted_true.as_ref().map(|p| p.predicted_estimate))),
                mean_predicted_fitted: mean_opt(
                    rows.iter().map(|r| r.predicted_fitted.as_ref().map(|p| p.predicted_estimate)),
                ),
                mean_fitted_demand_ar_sum: sums(|r| &r.fitted_demand_ar),
                mean_fitted_wind_ar_sum: sums(|r| &r.fitted_wind_ar),
                measured,
            }
        })
        .collect();

    Ok(ReplicatedResult { experiment: id, base_seed, seeds, cells, bias, runs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short() -> ExperimentOverrides {
        ExperimentOverrides { length: Some(2000), burn_in: Some(200), ..Default::default() }
    }

    #[test]
    fn single_replication_equals_single_run() {
        let agg = replicate(ExperimentId::StrategyGrid, &short(), 1, 11).unwrap();
        let single = run_experiment(
            ExperimentId::StrategyGrid,
            &ExperimentOverrides { seed: Some(derive_seed(11, 0)), ..short() },
        )
        .unwrap();
        assert_eq!(agg.cells.len(), 36);
        for (cell, row) in agg.cells.iter().zip(&single.estimates) {
            assert_eq!(cell.mean_slope, row.result.slope);
            assert_eq!(cell.std_slope, 0.0);
        }
    }

    #[test]
    fn same_base_seed_same_aggregates() {
        let a = replicate(ExperimentId::WindVariants, &short(), 3, 4).unwrap();
        let b = replicate(ExperimentId::WindVariants, &short(), 3, 4).unwrap();
        assert_eq!(a.cells, b.cells);
        assert_eq!(a.bias, b.bias);
        let c = replicate(ExperimentId::WindVariants, &short(), 3, 5).unwrap();
        assert_ne!(a.cells, c.cells);
    }

    #[test]
    fn zero_replications_rejected() {
        assert!(replicate(ExperimentId::Scatter, &short(), 0, 1).is_err());
    }
}
