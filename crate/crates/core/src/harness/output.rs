use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use super::experiments::{ExperimentId, ExperimentResult};
use super::replicate::{BiasAggregate, CellAggregate, ReplicatedResult};
use super::scenario::ScenarioConfig;
use crate::bias::BIAS_HEADER;
use crate::error::Result;
use crate::estimators::ESTIMATE_HEADER;
use crate::series::SeriesSummary;

/// `<out>/<experiment>-seed<seed>`
pub fn run_directory(out: impl AsRef<Path>, id: ExperimentId, seed: u64) -> PathBuf {
    out.as_ref().join(format!("{id}-seed{seed}"))
}

/// Appends `rows` to a CSV file, writing `header` only when the file is new or empty.
pub fn append_csv(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> Result<()> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut buf = String::new();
    if fresh {
        buf.push_str(header);
        buf.push('\n');
    }
    for row in rows {
        buf.push_str(&row);
        buf.push('\n');
    }
    file.write_all(buf.as_bytes())?;
    Ok(())
}

pub fn estimates_header() -> String {
    format!("{},true_slope,{ESTIMATE_HEADER},weak_instrument,note", ScenarioConfig::CSV_HEADER)
}

pub fn bias_header() -> String {
    format!(
        "{},measured_slope,measured_std_error,true_demand_ar,true_wind_ar,fitted_demand_ar,fitted_wind_ar,true_{},fitted_{}",
        ScenarioConfig::CSV_HEADER,
        BIAS_HEADER.replace(',', ",true_"),
        BIAS_HEADER.replace(',', ",fitted_")
    )
}

fn joined(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn prediction_fields(p: Option<&crate::bias::BiasPrediction>) -> String {
    p.map(|p| p.csv_row()).unwrap_or_else(|| ",,,,".into())
}

/// Writes the result files of one run, returning the run directory.
pub fn write_experiment(result: &ExperimentResult, out: impl AsRef<Path>) -> Result<PathBuf> {
    let meta = &result.metadata;
    let dir = run_directory(out, meta.experiment, meta.settings.seed);
    fs::create_dir_all(&dir)?;

    if !result.estimates.is_empty() {
        let rows = result.estimates.iter().map(|r| {
            format!(
                "{},{},{},{},{}",
                r.scenario.csv_fields(),
                r.true_slope,
                r.result.csv_row(),
                r.result.weak_instrument,
                r.note.as_deref().unwrap_or("")
            )
        });
        append_csv(&dir.join("estimates.csv"), &estimates_header(), rows)?;
    }

    if !result.bias.is_empty() {
        let rows = result.bias.iter().map(|r| {
            format!(
                "{},{},{},{},{},{},{},{},{}",
                r.scenario.csv_fields(),
                r.measured.slope,
                r.measured.std_error,
                joined(&r.true_demand_ar),
                joined(&r.true_wind_ar),
                joined(&r.fitted_demand_ar),
                joined(&r.fitted_wind_ar),
                prediction_fields(r.predicted_true.as_ref()),
                prediction_fields(r.predicted_fitted.as_ref())
            )
        });
        append_csv(&dir.join("bias.csv"), &bias_header(), rows)?;
    }

    if !result.summaries.is_empty() {
        let header = format!("{},series,{}", ScenarioConfig::CSV_HEADER, SeriesSummary::HEADER);
        let rows = result
            .summaries
            .iter()
            .map(|r| format!("{},{},{}", r.scenario.csv_fields(), r.series, r.summary.csv_row()));
        append_csv(&dir.join("summary.csv"), &header, rows)?;
    }

    if !result.panels.is_empty() {
        let panels = dir.join("panels");
        fs::create_dir_all(&panels)?;
        for (label, panel) in &result.panels {
            panel.write(panels.join(format!("{label}.csv")))?;
        }
    }

    let mut json = serde_json::to_string_pretty(meta).map_err(|e| std::io::Error::other(e.to_string()))?;
    json.push('\n');
    fs::write(dir.join("metadata.json"), json)?;
    Ok(dir)
}

/// Writes the aggregate tables and every individual run of a replication.
pub fn write_replicated(result: &ReplicatedResult, out: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = run_directory(out.as_ref(), result.experiment, result.base_seed);
    fs::create_dir_all(&dir)?;
    if !result.cells.is_empty() {
        append_csv(
            &dir.join("aggregate.csv"),
            CellAggregate::CSV_HEADER,
            result.cells.iter().map(CellAggregate::csv_row),
        )?;
    }
    if !result.bias.is_empty() {
        append_csv(
            &dir.join("aggregate_bias.csv"),
            BiasAggregate::CSV_HEADER,
            result.bias.iter().map(BiasAggregate::csv_row),
        )?;
    }
    let runs = dir.join("replications");
    for run in &result.runs {
        write_experiment(run, &runs)?;
    }
    let mut json = serde_json::to_string_pretty(&serde_json::json!({
        "experiment": result.experiment,
        "base_seed": result.base_seed,
        "seeds": result.seeds,
        "replications": result.seeds.len(),
        "settings": result.runs.first().map(|r| &r.metadata.settings),
        "version": env!("CARGO_PKG_VERSION"),
    }))
    .map_err(|e| std::io::Error::other(e.to_string()))?;
    json.push('\n');
    fs::write(dir.join("metadata.json"), json)?;
    Ok(dir)
}
