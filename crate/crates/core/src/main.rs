use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use elasticity_core::bias::{thams_bias_general, BIAS_HEADER};
use elasticity_core::estimators::{estimate, Bandwidth, StrategyKind, StrategySpec, ESTIMATE_HEADER};
use elasticity_core::harness::{
    replicate, run_experiment, run_scenario, write_experiment, write_replicated, ExperimentId, ExperimentOverrides,
    ScenarioConfig,
};
use elasticity_core::market::EquilibriumPanel;
use elasticity_core::series::{acf, pacf, TimeSeries};
use elasticity_core::wind::WindKind;
use elasticity_core::{Error, Result};

/// Simulate wind-driven electricity markets and estimate the demand slope.
#[derive(Debug, Parser)]
#[command(name = "elasticity-lab", version)]
struct Cli {
    /// TOML file with one table per subcommand; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one scenario and write its panel.
    Simulate(SimulateArgs),
    /// Estimate the demand slope on a panel file.
    Estimate(EstimateArgs),
    /// Run a named experiment, optionally replicated.
    Experiment(ExperimentArgs),
    /// Closed-form prediction of the IV estimate.
    Bias(BiasArgs),
    /// ACF/PACF table of a series.
    Diagnose(DiagnoseArgs),
}

/// A list of reals given either as a comma-separated string or a TOML array.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Reals {
    List(Vec<f64>),
    Text(String),
}

impl Reals {
    fn values(&self) -> Result<Vec<f64>> {
        match self {
            Reals::List(v) => Ok(v.clone()),
            Reals::Text(s) => parse_reals(s),
        }
    }
}

fn parse_reals(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| Error::InvalidParameter(format!("cannot parse `{t}` as a real number"))))
        .collect()
}

fn reals_arg(s: &str) -> std::result::Result<Reals, String> {
    Ok(Reals::Text(s.to_string()))
}

/// A bandwidth given as `auto` or a non-negative integer.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum BandwidthArg {
    Lags(usize),
    Text(String),
}

impl BandwidthArg {
    fn resolve(&self) -> Result<Bandwidth> {
        match self {
            BandwidthArg::Lags(n) => Ok(Bandwidth::Fixed(*n)),
            BandwidthArg::Text(s) => s.parse(),
        }
    }
}

fn bandwidth_arg(s: &str) -> std::result::Result<BandwidthArg, String> {
    Ok(BandwidthArg::Text(s.to_string()))
}

macro_rules! merge_from {
    ($self:ident, $file:ident; $($field:ident),* $(,)?) => {
        $( if $self.$field.is_none() { $self.$field = $file.$field; } )*
    };
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct SimulateArgs {
    /// Demand autoregressive order.
    #[arg(long = "l")]
    #[serde(alias = "l")]
    l: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// surrogate | ar1[:ALPHA] | empirical:PATH | shuffled[:WIND]
    #[arg(long)]
    wind: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Demand AR coefficients replacing the tabulated ones, e.g. `0.8`.
    #[arg(long, value_parser = reals_arg, allow_hyphen_values = true)]
    demand_ar: Option<Reals>,
    #[arg(long)]
    length: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    target_mean_demand: Option<f64>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct EstimateArgs {
    #[arg(long)]
    panel: Option<PathBuf>,
    /// ols | lagprice_iv | regular_iv | regular_iv_diff | conditional_iv | nuisance_iv
    #[arg(long)]
    strategy: Option<String>,
    /// Wind lags for conditional_iv.
    #[arg(long)]
    m: Option<usize>,
    /// Demand lags for nuisance_iv.
    #[arg(long)]
    lags: Option<usize>,
    /// `auto` or a number of lags.
    #[arg(long, value_parser = bandwidth_arg)]
    bandwidth: Option<BandwidthArg>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct ExperimentArgs {
    /// scatter | strategy-grid | conditional-sweep | wind-variants | alpha-sweep | bias-prediction
    #[arg(long)]
    id: Option<String>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    length: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    target_mean_demand: Option<f64>,
    /// Wind standing in for the actual wind series.
    #[arg(long)]
    wind: Option<String>,
    #[arg(long)]
    synthetic_wind_alpha: Option<f64>,
    #[arg(long)]
    conditional_lags: Option<usize>,
    #[arg(long)]
    sweep_max_lag: Option<usize>,
    #[arg(long)]
    nuisance_lags: Option<usize>,
    #[arg(long, value_parser = bandwidth_arg)]
    bandwidth: Option<BandwidthArg>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct BiasArgs {
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long, value_parser = reals_arg, allow_hyphen_values = true)]
    demand_ar: Option<Reals>,
    #[arg(long, value_parser = reals_arg, allow_hyphen_values = true)]
    wind_ar: Option<Reals>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct DiagnoseArgs {
    #[arg(long)]
    series: Option<PathBuf>,
    #[arg(long)]
    max_lag: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    simulate: SimulateArgs,
    estimate: EstimateArgs,
    experiment: ExperimentArgs,
    bias: BiasArgs,
    diagnose: DiagnoseArgs,
}

fn load_config(path: &Path) -> Result<ConfigFile> {
    let text = fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| {
        let message = e.message().replace('\n', " ");
        let row = e.span().map(|s| text[..s.start].lines().count().max(1)).unwrap_or(0);
        Error::Parse { row, message: format!("config {}: {message}", path.display()) }
    })
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Error::InvalidParameter(format!("missing required --{flag}")))
}

fn simulate(mut a: SimulateArgs, file: SimulateArgs) -> Result<()> {
    merge_from!(a, file; l, beta, wind, seed, out, demand_ar, length, burn_in, target_mean_demand);
    let order = required(a.l, "l")?;
    let wind = WindKind::parse(a.wind.as_deref().unwrap_or("surrogate"))?;
    let mut config = ScenarioConfig::new(order, a.beta.unwrap_or(0.0), wind);
    if let Some(ar) = &a.demand_ar {
        let ar = ar.values()?;
        if ar.len() != order {
            return Err(Error::LagMismatch { expected: order, actual: ar.len() });
        }
        config = config.with_demand_ar(ar);
    }
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    if let Some(length) = a.length {
        config.length = length;
    }
    if let Some(burn_in) = a.burn_in {
        config.burn_in = burn_in;
    }
    if let Some(target) = a.target_mean_demand {
        config.target_mean_demand = target;
    }
    let out = required(a.out, "out")?;
    let panel = run_scenario(&config)?;
    fs::create_dir_all(&out)?;
    let path = out.join(format!("{}-seed{}.csv", config.label(), config.seed));
    panel.write(&path)?;
    println!("{}", path.display());
    Ok(())
}

fn estimate_cmd(mut a: EstimateArgs, file: EstimateArgs) -> Result<()> {
    merge_from!(a, file; panel, strategy, m, lags, bandwidth);
    let panel = EquilibriumPanel::read(required(a.panel, "panel")?)?;
    let kind = StrategyKind::from_name(&required(a.strategy, "strategy")?, a.m, a.lags)?;
    let bandwidth = a.bandwidth.map(|b| b.resolve()).transpose()?.unwrap_or_default();
    let result = estimate(&StrategySpec::new(kind).with_bandwidth(bandwidth), &panel)?;
    println!("{ESTIMATE_HEADER}");
    println!("{}", result.csv_row());
    Ok(())
}

fn experiment_cmd(mut a: ExperimentArgs, file: ExperimentArgs) -> Result<()> {
    merge_from!(
        a, file; id, replications, seed, out, length, burn_in, target_mean_demand, wind,
        synthetic_wind_alpha, conditional_lags, sweep_max_lag, nuisance_lags, bandwidth
    );
    let id: ExperimentId = required(a.id, "id")?.parse()?;
    let out = required(a.out, "out")?;
    let overrides = ExperimentOverrides {
        seed: a.seed,
        length: a.length,
        burn_in: a.burn_in,
        target_mean_demand: a.target_mean_demand,
        wind: a.wind.as_deref().map(WindKind::parse).transpose()?,
        synthetic_wind_alpha: a.synthetic_wind_alpha,
        conditional_lags: a.conditional_lags,
        sweep_max_lag: a.sweep_max_lag,
        nuisance_lags: a.nuisance_lags,
        hac_bandwidth: a.bandwidth.map(|b| b.resolve()).transpose()?,
    };
    let dir = match a.replications.unwrap_or(1) {
        1 => write_experiment(&run_experiment(id, &overrides)?, &out)?,
        n => {
            let base = overrides.resolve().seed;
            write_replicated(&replicate(id, &overrides, n, base)?, &out)?
        }
    };
    println!("{}", dir.display());
    Ok(())
}

fn bias_cmd(mut a: BiasArgs, file: BiasArgs) -> Result<()> {
    merge_from!(a, file; beta, demand_ar, wind_ar);
    let beta = required(a.beta, "beta")?;
    let demand = required(a.demand_ar, "demand-ar")?.values()?;
    let wind = required(a.wind_ar, "wind-ar")?.values()?;
    let p = thams_bias_general(beta, &demand, &wind)?;
    println!("{BIAS_HEADER}");
    println!("{}", p.csv_row());
    Ok(())
}

fn diagnose(mut a: DiagnoseArgs, file: DiagnoseArgs) -> Result<()> {
    merge_from!(a, file; series, max_lag);
    let series = TimeSeries::read(required(a.series, "series")?)?;
    let max_lag = required(a.max_lag, "max-lag")?;
    let r = acf(&series, max_lag)?;
    let p = pacf(&series, max_lag)?;
    println!("lag,acf,pacf");
    for (k, (a, b)) in r.iter().zip(&p).enumerate() {
        println!("{},{a},{b}", k + 1);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => load_config(path)?,
        None => ConfigFile::default(),
    };
    match cli.command {
        Command::Simulate(a) => simulate(a, file.simulate),
        Command::Estimate(a) => estimate_cmd(a, file.estimate),
        Command::Experiment(a) => experiment_cmd(a, file.experiment),
        Command::Bias(a) => bias_cmd(a, file.bias),
        Command::Diagnose(a) => diagnose(a, file.diagnose),
    }
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error[usage]: {}", one_line(first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.kind(), one_line(&e.to_string()));
            ExitCode::FAILURE
        }
    }
}
