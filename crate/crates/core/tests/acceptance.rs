//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits nonzero if any criterion fails.

use std::process::ExitCode;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use elasticity_core::bias::thams_bias_ar1;
use elasticity_core::estimators::{estimate, hac_covariance, ols, tsls, Bandwidth, Column, StrategyKind, StrategySpec};
use elasticity_core::harness::{
    replicate, run_scenario, ExperimentId, ExperimentOverrides, ReplicatedResult, ScenarioConfig, DEFAULT_SEED,
    ELASTIC_SLOPE,
};
use elasticity_core::market::{demand_response, supply, EquilibriumPanel};
use elasticity_core::rng::derive_seed;
use elasticity_core::series::{fit_ar, simulate_ar, ArModel, TimeSeries};
use elasticity_core::wind::WindKind;

const REPS: usize = 20;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn label(order: usize, beta: f64, wind: WindKind) -> String {
    ScenarioConfig::new(order, beta, wind).label()
}

fn slopes(rep: &ReplicatedResult, scenario: &str, strategy: &str) -> Vec<f64> {
    rep.cell(scenario, strategy).unwrap_or_else(|| panic!("missing cell {scenario} / {strategy}")).slopes.clone()
}

fn criterion_1() -> Outcome {
    // (L, beta, demand std)
    let table = [
        (0, 0.0, 17.4),
        (1, 0.0, 17.7),
        (2, 0.0, 17.7),
        (0, ELASTIC_SLOPE, 16.0),
        (1, ELASTIC_SLOPE, 26.2),
        (2, ELASTIC_SLOPE, 25.7),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (order, beta, target_std) in table {
        let (mut dm, mut pm, mut ds) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..REPS as u64 {
            let config =
                ScenarioConfig::new(order, beta, WindKind::surrogate()).with_seed(derive_seed(DEFAULT_SEED, i));
            let panel = run_scenario(&config).expect("scenario");
            dm.push(panel.demand().mean());
            pm.push(panel.price().mean());
            ds.push(panel.demand().std_dev());
        }
        let (dm, pm, ds) = (mean(&dm), mean(&pm), mean(&ds));
        let ok = (dm - 374.0).abs() <= 4.0 && (pm - 63.5).abs() <= 2.0 && (ds - target_std).abs() <= 0.2 * target_std;
        pass &= ok;
        parts.push(format!("L{order}/b{beta}: d={dm:.1} p={pm:.1} sd={ds:.1} (target {target_std})"));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_2(grid: &ReplicatedResult, canonical: &ReplicatedResult) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for order in 0..=2 {
        let scenario = label(order, ELASTIC_SLOPE, WindKind::surrogate());
        let m = mean(&slopes(grid, &scenario, "nuisance_iv[l=2]"));
        let cond = canonical.cell(&scenario, "conditional_iv[m=26]").unwrap();
        let covered = cond.covered[0];
        pass &= (m - ELASTIC_SLOPE).abs() <= 0.03 && covered;
        parts.push(format!("L{order}: nuisance mean {m:.4}, conditional CI covers: {covered}"));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_3(grid: &ReplicatedResult) -> Outcome {
    let m = mean(&slopes(grid, &label(1, ELASTIC_SLOPE, WindKind::surrogate()), "regular_iv"));
    outcome(m <= -2.0, format!("regular_iv mean {m:.3} (bound -2.0)"))
}

fn criterion_4(sweep: &ReplicatedResult) -> Outcome {
    let alpha_label =
        |a: f64| ScenarioConfig::new(1, ELASTIC_SLOPE, WindKind::surrogate()).with_demand_ar(vec![a]).label();
    let reg = mean(&slopes(sweep, &alpha_label(0.8), "regular_iv"));
    let mut pass = (reg + 2.0).abs() <= 0.5;
    let mut worst: f64 = 0.0;
    for a in elasticity_core::harness::ALPHA_GRID {
        let m = mean(&slopes(sweep, &alpha_label(a), "nuisance_iv[l=2]"));
        worst = worst.max((m - ELASTIC_SLOPE).abs());
    }
    pass &= worst <= 0.05;
    outcome(pass, format!("regular_iv at 0.8: {reg:.3}; max |nuisance - beta| over grid {worst:.4}"))
}

fn criterion_5(variants: &ReplicatedResult) -> Outcome {
    let shuffled = label(1, ELASTIC_SLOPE, WindKind::shuffled(WindKind::surrogate()));
    let synthetic = label(1, ELASTIC_SLOPE, WindKind::synthetic_ar1(0.95));
    let sh = mean(&slopes(variants, &shuffled, "regular_iv"));
    let syn = mean(&slopes(variants, &synthetic, "regular_iv"));
    let fitted_alpha = variants.bias_cell(&synthetic).expect("bias cell").mean_fitted_demand_ar_sum;
    let predicted = thams_bias_ar1(ELASTIC_SLOPE, 0.95, fitted_alpha).expect("prediction").predicted_estimate;
    let rel = (syn - predicted).abs() / predicted.abs();
    let pass = (sh - ELASTIC_SLOPE).abs() <= 0.05 && rel <= 0.15;
    outcome(
        pass,
        format!(
            "shuffled regular_iv {sh:.4}; synthetic regular_iv {syn:.3} vs prediction {predicted:.3} \
             (fitted demand AR {fitted_alpha:.4}, rel err {:.1}%)",
            100.0 * rel
        ),
    )
}

fn criterion_6(grid: &ReplicatedResult) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for order in 0..=2 {
        let scenario = label(order, 0.0, WindKind::surrogate());
        if order >= 1 {
            let ols_min = slopes(grid, &scenario, "ols").into_iter().fold(f64::INFINITY, f64::min);
            let lag_min = slopes(grid, &scenario, "lagprice_iv").into_iter().fold(f64::INFINITY, f64::min);
            pass &= ols_min > 0.0 && lag_min > 0.0;
            parts.push(format!("L{order}: min ols {ols_min:.3}, min lagprice {lag_min:.3}"));
        }
        let covered = grid.cell(&scenario, "regular_iv").unwrap().covered.iter().filter(|&&c| c).count();
        pass &= covered >= 16;
        parts.push(format!("L{order}: regular_iv covers 0 in {covered}/{REPS}"));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_7(grid: &ReplicatedResult) -> Outcome {
    let scenario = label(1, ELASTIC_SLOPE, WindKind::surrogate());
    let reg = slopes(grid, &scenario, "regular_iv");
    let diff = slopes(grid, &scenario, "regular_iv_diff");
    let ordered = reg.iter().zip(&diff).filter(|(r, d)| ELASTIC_SLOPE.abs() < d.abs() && d.abs() < r.abs()).count();
    outcome(
        ordered >= 18,
        format!("ordered in {ordered}/{REPS} seeds (mean diff {:.3}, mean regular {:.3})", mean(&diff), mean(&reg)),
    )
}

fn white_covariance(x: &DMatrix<f64>, e: &[f64]) -> DMatrix<f64> {
    let bread = (x.transpose() * x).try_inverse().unwrap();
    let mut meat = DMatrix::zeros(x.ncols(), x.ncols());
    for (t, et) in e.iter().enumerate() {
        let row = x.row(t).transpose();
        meat += &row * row.transpose() * (et * et);
    }
    &bread * meat * &bread
}

fn criterion_8() -> Outcome {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(8);

    // 2SLS with the regressor as its own instrument reduces to OLS.
    let panel = run_scenario(&ScenarioConfig::new(1, ELASTIC_SLOPE, WindKind::surrogate())).unwrap();
    let (p, d) = (panel.price().values(), panel.demand().values());
    let o = ols(d, &[Column::new("price", p)], Bandwidth::Auto).unwrap();
    let t = tsls(d, Column::new("price", p), &[Column::new("price_instrument", p)], &[], Bandwidth::Auto).unwrap();
    let gap = o
        .coefficients
        .iter()
        .zip(&t.coefficients)
        .map(|(a, b)| (a - b).abs())
        .chain(o.covariance.iter().flatten().zip(t.covariance.iter().flatten()).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);
    if gap > 1e-8 {
        failures.push(format!("2SLS/OLS gap {gap:e}"));
    }

    // HAC with bandwidth 0 is the White covariance; random designs are PSD.
    let mut worst_white: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    for i in 0..1000 {
        let n = rng.random_range(10..60);
        let k = rng.random_range(1..5);
        let x = DMatrix::from_fn(n, k, |_, j| if j == 0 { 1.0 } else { rng.random_range(-3.0..3.0) });
        let e: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        if i < 200 {
            let h = hac_covariance(&x, &e, 0).unwrap();
            let w = white_covariance(&x, &e);
            let scale = w.abs().max().max(1.0);
            worst_white = worst_white.max((h - w).abs().max() / scale);
        }
        let bw = rng.random_range(0..n);
        let h = hac_covariance(&x, &e, bw).unwrap();
        let lam = h.clone().symmetric_eigen().eigenvalues.min() / h.abs().max().max(1e-300);
        min_eig = min_eig.min(lam);
    }
    if worst_white > 1e-10 {
        failures.push(format!("HAC(0) vs White {worst_white:e}"));
    }
    if min_eig < -1e-8 {
        failures.push(format!("HAC min relative eigenvalue {min_eig:e}"));
    }

    // Market clearing at every simulated step.
    let mut worst_clear: f64 = 0.0;
    for order in 0..=2 {
        for beta in [0.0, ELASTIC_SLOPE] {
            let panel = run_scenario(&ScenarioConfig::new(order, beta, WindKind::surrogate())).unwrap();
            let params = panel.params().unwrap();
            let noise = panel.noise().unwrap();
            let (w, p, d) = (panel.wind().values(), panel.price().values(), panel.demand().values());
            for t in order..panel.len() {
                let lags: Vec<f64> = (1..=order).map(|l| d[t - l]).collect();
                let dr = demand_response(params, p[t], &lags, noise.demand[t]).unwrap();
                let s = supply(params, p[t], w[t], noise.supply[t]);
                worst_clear = worst_clear.max((dr - s).abs() / dr.abs().max(1.0));
                worst_clear = worst_clear.max((dr - d[t]).abs() / d[t].abs().max(1.0));
            }
        }
    }
    if worst_clear > 1e-9 {
        failures.push(format!("market clearing error {worst_clear:e}"));
    }

    // fit_ar recovers simulate_ar coefficients.
    let mut worst_ar: f64 = 0.0;
    for (i, coefs) in
        [vec![0.5], vec![-0.6], vec![0.97], vec![1.2, -0.24], vec![1.84, -0.85], vec![0.3, 0.2]].into_iter().enumerate()
    {
        let model = ArModel::new(2.0, coefs.clone(), 1.0).unwrap();
        let series = simulate_ar(&model, 8760, 100 + i as u64, None).unwrap();
        let fit = fit_ar(&series, coefs.len()).unwrap();
        for (a, b) in fit.coefficients().iter().zip(&coefs) {
            worst_ar = worst_ar.max((a - b).abs());
        }
    }
    if worst_ar > 0.05 {
        failures.push(format!("AR round trip error {worst_ar}"));
    }

    // Shifting demand by a constant leaves every slope unchanged.
    let mut worst_shift: f64 = 0.0;
    let panel = run_scenario(&ScenarioConfig::new(2, ELASTIC_SLOPE, WindKind::surrogate())).unwrap();
    let shifted_demand: Vec<f64> = panel.demand().values().iter().map(|x| x + 250.0).collect();
    let shifted =
        EquilibriumPanel::new(panel.wind().clone(), panel.price().clone(), TimeSeries::new(shifted_demand).unwrap())
            .unwrap();
    for kind in [
        StrategyKind::Ols,
        StrategyKind::LagpriceIv,
        StrategyKind::RegularIv,
        StrategyKind::RegularIvDiff,
        StrategyKind::ConditionalIv { wind_lags: 26 },
        StrategyKind::NuisanceIv { demand_lags: 2 },
    ] {
        let spec = StrategySpec::new(kind);
        let a = estimate(&spec, &panel).unwrap();
        let b = estimate(&spec, &shifted).unwrap();
        worst_shift = worst_shift.max((a.slope - b.slope).abs());
    }
    if worst_shift > 1e-8 {
        failures.push(format!("intercept shift changed a slope by {worst_shift:e}"));
    }

    let detail = format!(
        "2sls-ols {gap:.1e}, hac0-white {worst_white:.1e}, min eig {min_eig:.1e}, clearing {worst_clear:.1e}, \
         ar {worst_ar:.3}, shift {worst_shift:.1e}"
    );
    if failures.is_empty() {
        outcome(true, detail)
    } else {
        outcome(false, format!("{}; {detail}", failures.join("; ")))
    }
}

fn criterion_9(bias: &ReplicatedResult) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for a in [0.2, 0.4, 0.6, 0.8] {
        let scenario =
            ScenarioConfig::new(1, ELASTIC_SLOPE, WindKind::synthetic_ar1(0.95)).with_demand_ar(vec![a]).label();
        let measured = bias.bias_cell(&scenario).expect("bias cell").mean_measured;
        let predicted = thams_bias_ar1(ELASTIC_SLOPE, 0.95, a).unwrap().predicted_estimate;
        let rel = (measured - predicted).abs() / predicted.abs();
        pass &= rel <= 0.15;
        parts.push(format!("a={a}: {measured:.3} vs {predicted:.3} ({:.1}%)", 100.0 * rel));
    }
    outcome(pass, parts.join("; "))
}

fn main() -> ExitCode {
    let defaults = ExperimentOverrides::default();
    let grid = replicate(ExperimentId::StrategyGrid, &defaults, REPS, DEFAULT_SEED).expect("strategy-grid");
    let canonical = replicate(ExperimentId::StrategyGrid, &defaults, 1, DEFAULT_SEED).expect("strategy-grid");
    let sweep = replicate(ExperimentId::AlphaSweep, &defaults, REPS, DEFAULT_SEED).expect("alpha-sweep");
    let variants = replicate(ExperimentId::WindVariants, &defaults, REPS, DEFAULT_SEED).expect("wind-variants");
    let bias = replicate(ExperimentId::BiasPrediction, &defaults, REPS, DEFAULT_SEED).expect("bias-prediction");

    let results = [
        ("1 calibrated scenario moments", criterion_1()),
        ("2 nuisance and conditional IV recover the slope", criterion_2(&grid, &canonical)),
        ("3 regular IV inflated on elastic L=1", criterion_3(&grid)),
        ("4 demand AR sweep anchor", criterion_4(&sweep)),
        ("5 instrument autocorrelation variants", criterion_5(&variants)),
        ("6 inelastic sign and coverage", criterion_6(&grid)),
        ("7 first-difference ordering", criterion_7(&grid)),
        ("8 property suites", criterion_8()),
        ("9 bias formula tracks measured IV", criterion_9(&bias)),
    ];

    let mut failed = 0;
    for (name, o) in &results {
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
