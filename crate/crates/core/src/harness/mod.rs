//! Scenario grid, named experiments, replication and result files.

mod experiments;
mod output;
mod replicate;
mod scenario;

pub use experiments::{
    run_experiment, run_named_experiment, BiasRow, EstimateRow, ExperimentId, ExperimentMetadata, ExperimentOverrides,
    ExperimentResult, ExperimentSettings, SummaryRow, ALPHA_GRID, BIAS_AR1_GRID, BIAS_AR2_SUMS,
};
pub use output::{append_csv, run_directory, write_experiment, write_replicated};
pub use replicate::{replicate, BiasAggregate, CellAggregate, ReplicatedResult};
pub use scenario::{
    default_supply, demand_ar_table, run_scenario, ScenarioConfig, DEFAULT_LENGTH, DEFAULT_SEED, DEFAULT_TARGET_DEMAND,
    ELASTIC_SLOPE,
};
