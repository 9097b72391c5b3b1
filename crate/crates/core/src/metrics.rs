//! Error metrics and the Monte Carlo experiment harness.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::DensityEstimator;
use crate::grid::DensityGrid;
use crate::quadrature::trapezoid;
use crate::svsim::{
    log_squared_transform, normal_pdf, simulate_pure_convolution, simulate_scenario, OuParams, RegimeSwitchParams,
    ScenarioConfig, TruthDensity, VolModel, DEFAULT_LOG_FLOOR, DEFAULT_SUBSTEPS,
};

/// `∫(estimate - truth)²` by the trapezoid rule on the common grid.
pub fn mise(estimate: &DensityGrid, truth: &DensityGrid) -> Result<f64> {
    if !estimate.same_abscissae(truth) {
        return Err(Error::GridMismatch("estimate and truth are on different grids".into()));
    }
    let sq: Vec<f64> = estimate.values().iter().zip(truth.values()).map(|(a, b)| (a - b).powi(2)).collect();
    Ok(trapezoid(estimate.x(), &sq))
}

/// Interior strict local maxima of the clipped, renormalized grid whose
/// topographic prominence exceeds `prominence`. Plateaus count once.
pub fn mode_count(grid: &DensityGrid, prominence: f64) -> usize {
    if grid.len() < 3 {
        return 0;
    }
    let Ok(clean) = grid.clipped_normalized() else {
        return 0;
    };
    let mut runs: Vec<f64> = Vec::with_capacity(clean.len());
    for &v in clean.values() {
        if runs.last() != Some(&v) {
            runs.push(v);
        }
    }
    let mut count = 0;
    for p in 1..runs.len().saturating_sub(1) {
        let v = runs[p];
        if !(v > runs[p - 1] && v > runs[p + 1]) {
            continue;
        }
        let mut left_min = v;
        for &u in runs[..p].iter().rev() {
            if u > v {
                break;
            }
            left_min = left_min.min(u);
        }
        let mut right_min = v;
        for &u in &runs[p + 1..] {
            if u > v {
                break;
            }
            right_min = right_min.min(u);
        }
        if v - left_min.max(right_min) > prominence {
            count += 1;
        }
    }
    count
}

#[derive(Debug, Clone)]
pub struct NormalFit {
    pub mean: f64,
    pub variance: f64,
    pub fitted: DensityGrid,
}

/// Normal density with the mean and variance of the clipped, renormalized grid.
pub fn normal_fit(grid: &DensityGrid) -> Result<NormalFit> {
    let clean = grid.clipped_normalized()?;
    let x = clean.x();
    let f = clean.values();
    let first: Vec<f64> = x.iter().zip(f).map(|(x, f)| x * f).collect();
    let mean = trapezoid(x, &first);
    let second: Vec<f64> = x.iter().zip(f).map(|(x, f)| (x - mean).powi(2) * f).collect();
    let variance = trapezoid(x, &second);
    let sd = variance.sqrt();
    let fitted = DensityGrid::new(x.to_vec(), x.iter().map(|&t| normal_pdf(t, mean, sd)).collect(), false)?;
    Ok(NormalFit { mean, variance, fitted })
}

/// Value at `x` by linear interpolation; `None` outside the grid.
pub fn interpolate(grid: &DensityGrid, x: f64) -> Option<f64> {
    let xs = grid.x();
    if grid.is_empty() || x < xs[0] || x > xs[xs.len() - 1] {
        return None;
    }
    let i = xs.partition_point(|&t| t <= x).min(xs.len() - 1).max(1);
    let (x0, x1) = (xs[i - 1], xs[i]);
    let (y0, y1) = (grid.values()[i - 1], grid.values()[i]);
    Some(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
}

/// Data-generating process of an experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExperimentScenario {
    /// A simulated volatility model; the seeds are replaced per replication.
    Simulated(ScenarioConfig),
    /// `Y = ξ + log Z²` with i.i.d. `ξ ~ N(mean, sd²)`.
    PureConvolution { n: usize, mean: f64, sd: f64 },
}

impl ExperimentScenario {
    pub const PRESETS: [&'static str; 3] = ["ou-exp", "regime-switch", "pure-convolution"];

    /// Shipped presets with `n` observations.
    pub fn preset(name: &str, n: usize) -> Result<Self> {
        let simulated = |model, delta| {
            ExperimentScenario::Simulated(ScenarioConfig {
                model,
                drift: 0.0,
                delta,
                n,
                substeps: DEFAULT_SUBSTEPS,
                vol_seed: 1,
                price_seed: 2,
            })
        };
        match name {
            "ou-exp" => Ok(simulated(VolModel::OuExp(OuParams::new(0.5, 0.0, 1.0)), 0.05)),
            "regime-switch" => Ok(simulated(VolModel::RegimeSwitchExp(bimodal_regimes()), 0.1)),
            "pure-convolution" => Ok(ExperimentScenario::PureConvolution { n, mean: 0.0, sd: 1.0 }),
            other => Err(Error::UnknownModel(other.to_string())),
        }
    }

    fn truth(&self) -> TruthDensity {
        match self {
            ExperimentScenario::Simulated(cfg) => match cfg.model {
                VolModel::OuExp(p) => TruthDensity::Normal { mean: p.mu, sd: p.stationary_variance().sqrt() },
                VolModel::RegimeSwitchExp(p) => {
                    let (_, w1) = p.stationary_probs();
                    TruthDensity::Mixture {
                        w1,
                        mean1: p.regime1.mu,
                        sd1: p.regime1.stationary_variance().sqrt(),
                        mean0: p.regime0.mu,
                        sd0: p.regime0.stationary_variance().sqrt(),
                    }
                }
                VolModel::NonlinearAr(p) => p.m.stationary_law(p.eta_sd),
            },
            ExperimentScenario::PureConvolution { mean, sd, .. } => TruthDensity::Normal { mean: *mean, sd: *sd },
        }
    }

    /// Log-squared observations for one seed pair.
    pub fn observations(&self, seeds: (u64, u64)) -> Result<Vec<f64>> {
        match *self {
            ExperimentScenario::Simulated(cfg) => {
                let cfg = ScenarioConfig { vol_seed: seeds.0, price_seed: seeds.1, ..cfg };
                let (series, _) = simulate_scenario(&cfg)?;
                Ok(log_squared_transform(&series.normalized_increments(), DEFAULT_LOG_FLOOR).y)
            }
            ExperimentScenario::PureConvolution { n, mean, sd } => Ok(simulate_pure_convolution(n, mean, sd, seeds).0),
        }
    }
}

/// Two OU regimes at `∓2` with stationary sd 0.5 and symmetric switching.
pub fn bimodal_regimes() -> RegimeSwitchParams {
    let a = 0.5f64.sqrt();
    RegimeSwitchParams {
        regime0: OuParams::new(1.0, -2.0, a),
        regime1: OuParams::new(1.0, 2.0, a),
        rate01: 0.5,
        rate10: 0.5,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    /// Squared error at a point.
    MsePoint(f64),
    Mise,
    /// Mode count with the given prominence floor.
    ModeCount(f64),
    /// Mean and variance of the fitted normal (two columns).
    MomentFit,
}

impl Metric {
    fn columns(&self) -> Vec<String> {
        match self {
            Metric::MsePoint(x) => vec![format!("se_at_{x}")],
            Metric::Mise => vec!["ise".into()],
            Metric::ModeCount(_) => vec!["modes".into()],
            Metric::MomentFit => vec!["fit_mean".into(), "fit_variance".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub scenario: ExperimentScenario,
    pub estimator: DensityEstimator,
    pub replications: usize,
    pub seed_base: u64,
    pub metrics: Vec<Metric>,
    pub grid: Vec<f64>,
}

impl ExperimentSpec {
    /// Seed pair of replication `r`: `(base + 2r, base + 2r + 1)`.
    pub fn seeds(&self, r: usize) -> (u64, u64) {
        let s = self.seed_base.wrapping_add(2 * r as u64);
        (s, s.wrapping_add(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRow {
    pub seed: u64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub column: String,
    pub mean: f64,
    /// Monte Carlo standard error of the mean.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub columns: Vec<String>,
    /// Sorted by seed.
    pub rows: Vec<ReplicationRow>,
    pub aggregates: Vec<Aggregate>,
}

impl ExperimentReport {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r.values[i]).collect())
    }

    /// Per-replication table with a leading `seed` column.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["seed".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.seed.to_string()];
            rec.extend(row.values.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Plain-text aggregate table.
    pub fn summary_table(&self) -> String {
        let width = self.aggregates.iter().map(|a| a.column.len()).max().unwrap_or(6).max(6);
        let mut s = format!("{:<width$}  {:>14}  {:>14}\n", "metric", "mean", "mc_std_error");
        for a in &self.aggregates {
            let _ = writeln!(s, "{:<width$}  {:>14.6e}  {:>14.6e}", a.column, a.mean, a.std_error);
        }
        let _ = writeln!(s, "replications: {}", self.rows.len());
        s
    }
}

/// Runs the replications (in parallel) and aggregates the metrics.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    if spec.replications == 0 {
        return Err(Error::Parameter("replication count must be at least 1".into()));
    }
    if spec.metrics.is_empty() {
        return Err(Error::Parameter("no metrics requested".into()));
    }
    let truth_law = spec.scenario.truth();
    let truth = truth_law.on_grid(&spec.grid);
    let needs_truth = spec.metrics.iter().any(|m| matches!(m, Metric::Mise | Metric::MsePoint(_)));
    if needs_truth && truth.is_none() {
        return Err(Error::Parameter("error metrics need a scenario with a known invariant density".into()));
    }
    let columns: Vec<String> = spec.metrics.iter().flat_map(Metric::columns).collect();
    let mut rows = (0..spec.replications)
        .into_par_iter()
        .map(|r| {
            let seeds = spec.seeds(r);
            let y = spec.scenario.observations(seeds)?;
            let est = spec.estimator.estimate(&y, &spec.grid)?.density;
            let mut values = Vec::with_capacity(columns.len());
            for m in &spec.metrics {
                match *m {
                    Metric::MsePoint(x) => {
                        let v = interpolate(&est, x)
                            .ok_or_else(|| Error::Parameter(format!("point {x} lies outside the grid")))?;
                        let t = truth_law.pdf(x).expect("checked above");
                        values.push((v - t).powi(2));
                    }
                    Metric::Mise => values.push(mise(&est, truth.as_ref().expect("checked above"))?),
                    Metric::ModeCount(p) => values.push(mode_count(&est, p) as f64),
                    Metric::MomentFit => {
                        let fit = normal_fit(&est)?;
                        values.push(fit.mean);
                        values.push(fit.variance);
                    }
                }
            }
            Ok(ReplicationRow { seed: seeds.0, values })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| r.seed);
    let aggregates = columns
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let v: Vec<f64> = rows.iter().map(|r| r.values[i]).collect();
            let (mean, std_error) = mean_and_se(&v);
            Aggregate { column: c.clone(), mean, std_error }
        })
        .collect();
    Ok(ExperimentReport { columns, rows, aggregates })
}

/// Sample mean and its standard error (zero for a single value).
pub fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
