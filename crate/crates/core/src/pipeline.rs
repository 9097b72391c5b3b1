//! End-to-end pipeline behind the CLI: ingest prices (or simulate a
//! scenario), form `Y = log(X²)` from the normalized increments, run one
//! estimator and write plot-ready files.
//!
//! The sampling gap `Δ` of real data is declared by the user and defaults
//! to one. The discrete-time reading of the model (`ξ_{t+1} = m(ξ_t) + η_t`)
//! gives exactly the same estimator as a function of the data, so the
//! pipeline is meaningful under either reading.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Read};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{Bandwidth, DensityEstimator};
use crate::grid::linspace;
use crate::kerneldeconv::{estimate_density, gamma_delta_warning, KernelSpec, DEFAULT_GRID_POINTS};
use crate::metrics::{mode_count, normal_fit, ExperimentScenario};
use crate::noisemodel::NOISE_MEAN;
use crate::ppe::{select_and_estimate, PpeConfig};
use crate::svsim::{
    log_squared_transform, simulate_scenario, ArVolParams, ObservationSeries, ScenarioConfig, VolModel,
    DEFAULT_LOG_FLOOR,
};
use crate::volreg::{default_regression_bandwidth, regression_estimate, RegressionFn, RegressionOptions};
use crate::wavelet::{self, wavelet_estimate, Level, Truncation, WaveletSpec};

/// Default kernel `γ` in `h = γπ / log n`.
pub const DEFAULT_KERNEL_GAMMA: f64 = 1.0;
/// Default regression `γ` in `h = γ / log n` (must exceed π).
pub const DEFAULT_REGRESSION_GAMMA: f64 = 3.5;
/// Prominence floor of the mode-count diagnostic.
pub const MODE_PROMINENCE: f64 = 0.02;
/// Observations simulated for a scenario preset unless overridden.
pub const DEFAULT_SCENARIO_N: usize = 2600;
pub const DEFAULT_SEED: u64 = 1;

/// Scenario presets understood by `--scenario`.
pub const SCENARIO_PRESETS: [&str; 3] = ["ou-exp", "regime-switch", "nonlinear-ar"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Kernel,
    Wavelet,
    Ppe,
    Regression,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Kernel => "kernel",
            EstimatorKind::Wavelet => "wavelet",
            EstimatorKind::Ppe => "ppe",
            EstimatorKind::Regression => "regression",
        }
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kernel" => Ok(EstimatorKind::Kernel),
            "wavelet" => Ok(EstimatorKind::Wavelet),
            "ppe" => Ok(EstimatorKind::Ppe),
            "regression" => Ok(EstimatorKind::Regression),
            other => Err(Error::UnknownEstimator(other.to_string())),
        }
    }
}

/// Every pipeline setting as an optional value, so that a config file and
/// command-line flags can be layered (flags win). The config file is the
/// TOML rendering of this struct, with the flag names as keys.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct PipelineOptions {
    pub input: Option<PathBuf>,
    /// Preset name or path of a scenario file.
    pub scenario: Option<String>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub estimator: Option<String>,
    pub demean: Option<bool>,
    pub delta: Option<f64>,
    pub out: Option<PathBuf>,
    pub bandwidth: Option<f64>,
    pub gamma: Option<f64>,
    pub grid_points: Option<usize>,
    /// `auto` or a level `m`.
    pub level: Option<String>,
    /// `auto` (`L = n`) or a fixed `L`.
    pub truncation: Option<String>,
    pub kappa: Option<f64>,
    pub kn: Option<usize>,
    pub denominator_floor: Option<f64>,
    /// Subtract `E log Z²` from the regression responses.
    pub center_response: Option<bool>,
}

impl PipelineOptions {
    pub fn from_text(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("pipeline options always serialize")
    }

    /// `self` with every field set in `flags` replaced.
    pub fn overlay(mut self, flags: PipelineOptions) -> Self {
        // bandwidth and γ are alternatives: a flag for one discards the other
        if flags.bandwidth.is_some() {
            self.gamma = None;
        }
        if flags.gamma.is_some() {
            self.bandwidth = None;
        }
        // likewise the two input sources
        if flags.input.is_some() {
            self.scenario = None;
        }
        if flags.scenario.is_some() {
            self.input = None;
        }
        macro_rules! pick {
            ($($f:ident),*) => { PipelineOptions { $($f: flags.$f.or(self.$f)),* } };
        }
        pick!(
            input,
            scenario,
            n,
            seed,
            estimator,
            demean,
            delta,
            out,
            bandwidth,
            gamma,
            grid_points,
            level,
            truncation,
            kappa,
            kn,
            denominator_floor,
            center_response
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputSource {
    Csv(PathBuf),
    Scenario(ScenarioConfig),
}

/// Estimator selection with its module settings.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    pub grid_points: usize,
    pub bandwidth: Option<f64>,
    pub gamma: Option<f64>,
    pub level: Level,
    pub truncation: Truncation,
    pub kappa: f64,
    pub kn: Option<usize>,
    pub denominator_floor: f64,
    pub center_response: bool,
}

impl EstimatorConfig {
    pub fn from_options(opts: &PipelineOptions) -> Result<Self> {
        let kind: EstimatorKind = opts.estimator.as_deref().unwrap_or("kernel").parse()?;
        let grid_points = opts.grid_points.unwrap_or(DEFAULT_GRID_POINTS);
        if grid_points < 3 {
            return Err(Error::Parameter(format!("need at least 3 grid points, got {grid_points}")));
        }
        if opts.bandwidth.is_some() && opts.gamma.is_some() {
            return Err(Error::Config("give either a bandwidth or γ, not both".into()));
        }
        Ok(Self {
            kind,
            grid_points,
            bandwidth: opts.bandwidth,
            gamma: opts.gamma,
            level: parse_auto(opts.level.as_deref(), "level")?.map_or(Level::Auto, |m| Level::Fixed(m as u32)),
            truncation: parse_auto(opts.truncation.as_deref(), "truncation")?
                .map_or(Truncation::SampleSize, |l| Truncation::Fixed(l as usize)),
            kappa: opts.kappa.unwrap_or(1.0),
            kn: opts.kn,
            denominator_floor: opts.denominator_floor.unwrap_or(crate::volreg::DEFAULT_DENOMINATOR_FLOOR),
            center_response: opts.center_response.unwrap_or(true),
        })
    }

    /// Kernel bandwidth rule for the density estimator.
    pub fn kernel_bandwidth(&self) -> Bandwidth {
        match self.bandwidth {
            Some(h) => Bandwidth::Fixed(h),
            None => Bandwidth::Gamma(self.gamma.unwrap_or(DEFAULT_KERNEL_GAMMA)),
        }
    }

    pub fn wavelet_spec(&self) -> WaveletSpec {
        WaveletSpec {
            level: self.level,
            truncation: self.truncation,
            grid_points: self.grid_points,
            ..WaveletSpec::default()
        }
    }

    pub fn ppe_config(&self) -> PpeConfig {
        PpeConfig { kappa: self.kappa, kn: self.kn, grid_points: self.grid_points, ..PpeConfig::default() }
    }

    /// The configured density estimator; regression is not one.
    pub fn density_estimator(&self) -> Result<DensityEstimator> {
        match self.kind {
            EstimatorKind::Kernel => {
                Ok(DensityEstimator::Kernel { bandwidth: self.kernel_bandwidth(), clip_and_normalize: false })
            }
            EstimatorKind::Wavelet => Ok(DensityEstimator::Wavelet(self.wavelet_spec())),
            EstimatorKind::Ppe => Ok(DensityEstimator::Ppe(self.ppe_config())),
            EstimatorKind::Regression => Err(Error::Config("regression does not estimate a density".into())),
        }
    }
}

/// Fully resolved pipeline settings.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub input: InputSource,
    pub demean: bool,
    /// Sampling gap of CSV input; scenarios carry their own.
    pub delta: f64,
    pub out: PathBuf,
    pub estimator: EstimatorConfig,
    /// The options this config was resolved from, echoed to `config.toml`.
    pub options: PipelineOptions,
}

impl PipelineConfig {
    pub fn resolve(opts: PipelineOptions) -> Result<Self> {
        let estimator = EstimatorConfig::from_options(&opts)?;
        let input = match (&opts.input, &opts.scenario) {
            (Some(path), None) => InputSource::Csv(path.clone()),
            (None, Some(s)) => InputSource::Scenario(resolve_scenario(s, opts.n, opts.seed, opts.delta)?),
            (Some(_), Some(_)) => return Err(Error::Config("give either an input CSV or a scenario, not both".into())),
            (None, None) => return Err(Error::Config("no input: give an input CSV or a scenario".into())),
        };
        let delta = opts.delta.unwrap_or(1.0);
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Parameter(format!("sampling gap must be positive, got {delta}")));
        }
        Ok(Self {
            input,
            demean: opts.demean.unwrap_or(false),
            delta,
            out: opts.out.clone().unwrap_or_else(|| PathBuf::from("voldecon-out")),
            estimator,
            options: opts,
        })
    }
}

fn parse_auto(v: Option<&str>, what: &str) -> Result<Option<u64>> {
    match v {
        None | Some("auto") => Ok(None),
        Some(s) => s
            .parse()
            .map(Some)
            .map_err(|_| Error::Parameter(format!("{what} must be `auto` or a non-negative integer, got `{s}`"))),
    }
}

/// A scenario preset with `n` observations and seeds `(seed, seed + 1)`, or a
/// scenario file when `name` is not a preset.
pub fn resolve_scenario(name: &str, n: Option<usize>, seed: Option<u64>, delta: Option<f64>) -> Result<ScenarioConfig> {
    let n = n.unwrap_or(DEFAULT_SCENARIO_N);
    let seed = seed.unwrap_or(DEFAULT_SEED);
    let mut cfg = match name {
        "ou-exp" | "regime-switch" => match ExperimentScenario::preset(name, n)? {
            ExperimentScenario::Simulated(cfg) => cfg,
            ExperimentScenario::PureConvolution { .. } => unreachable!("simulated presets only"),
        },
        "nonlinear-ar" => ScenarioConfig {
            model: VolModel::NonlinearAr(ArVolParams { m: RegressionFn::linear(0.5, 0.0), eta_sd: 1.0 }),
            drift: 0.0,
            delta: 1.0,
            n,
            substeps: 1,
            vol_seed: 0,
            price_seed: 0,
        },
        path if Path::new(path).is_file() => {
            let cfg = ScenarioConfig::from_text(&fs::read_to_string(path)?)?;
            // a scenario file is taken as written
            return Ok(cfg);
        }
        other => {
            return Err(Error::UnknownModel(format!(
                "{other} (presets: {}; or a scenario file)",
                SCENARIO_PRESETS.join(", ")
            )))
        }
    };
    cfg.vol_seed = seed;
    cfg.price_seed = seed.wrapping_add(1);
    if let Some(d) = delta {
        cfg.delta = d;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Reads a price CSV: a header row, then strictly positive prices. The
/// price column is the only column, or the one headed `price`/`close`
/// (case-insensitive). Returns log prices `S_i = log P_i`.
pub fn ingest_prices<R: Read>(reader: R, delta: f64) -> Result<ObservationSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = if headers.len() == 1 {
        0
    } else {
        let names = ["price", "close", "adj close", "adj_close"];
        names
            .iter()
            .find_map(|want| headers.iter().position(|h| h.eq_ignore_ascii_case(want)))
            .ok_or_else(|| Error::Data(format!("no price column among {:?}", headers.iter().collect::<Vec<_>>())))?
    };
    let mut log_prices = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        let cell = rec.get(column).ok_or_else(|| Error::Data(format!("line {line}: missing price cell")))?;
        let p: f64 = cell.parse().map_err(|_| Error::Data(format!("line {line}: `{cell}` is not a number")))?;
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::Data(format!("line {line}: price must be positive and finite, got {p}")));
        }
        log_prices.push(p.ln());
    }
    if log_prices.len() < 3 {
        return Err(Error::TooSmall(format!("need at least 3 prices, got {}", log_prices.len())));
    }
    ObservationSeries::new(delta, log_prices)
}

/// Loads (or simulates) the series and applies the demeaning flag.
pub fn load_series(cfg: &PipelineConfig) -> Result<ObservationSeries> {
    let series = match &cfg.input {
        InputSource::Csv(path) => ingest_prices(File::open(path)?, cfg.delta)?,
        InputSource::Scenario(sc) => simulate_scenario(sc)?.0,
    };
    Ok(if cfg.demean { series.demeaned() } else { series })
}

/// Files written by [`run_pipeline`] and the diagnostics they contain.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub files: Vec<PathBuf>,
    pub diagnostics: Vec<(String, f64)>,
}

impl PipelineOutput {
    pub fn diagnostic(&self, name: &str) -> Option<f64> {
        self.diagnostics.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }
}

/// Runs the configured estimator and writes, into `cfg.out`:
/// `density.csv` (or `regression.csv`), `diagnostics.csv`, `config.toml`,
/// `plot.gp`, plus `coefficients.csv` (wavelet) or `levels.csv` (ppe).
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let series = load_series(cfg)?;
    let returns = series.increments();
    let ls = log_squared_transform(&series.normalized_increments(), DEFAULT_LOG_FLOOR);
    let y = ls.y;
    let n = y.len();
    if n < 3 {
        return Err(Error::TooSmall(format!("need at least 3 increments, got {n}")));
    }
    fs::create_dir_all(&cfg.out)?;
    let mut diag: Vec<(String, f64)> = vec![
        ("n".into(), n as f64),
        ("delta".into(), series.delta),
        ("mean_return".into(), returns.iter().sum::<f64>() / returns.len() as f64),
        ("floored_increments".into(), ls.floored as f64),
    ];
    let mut files = Vec::new();
    let mut extra_plot = String::new();
    let data_file;

    let est_cfg = &cfg.estimator;
    match est_cfg.kind {
        EstimatorKind::Regression => {
            let h = match (est_cfg.bandwidth, est_cfg.gamma) {
                (Some(h), _) => h,
                (None, g) => default_regression_bandwidth(n, g.unwrap_or(DEFAULT_REGRESSION_GAMMA))?,
            };
            let opts = RegressionOptions {
                denominator_floor: est_cfg.denominator_floor,
                center_response: est_cfg.center_response,
                ..RegressionOptions::default()
            };
            let grid = regression_grid(&y, est_cfg.grid_points);
            let est = regression_estimate(&y, h, &grid, &opts)?;
            diag.push(("bandwidth".into(), h));
            diag.push(("masked_points".into(), est.masked.iter().filter(|m| **m).count() as f64));
            diag.push(("center_response".into(), f64::from(u8::from(est_cfg.center_response))));
            data_file = "regression.csv";
            est.write_csv(create(&cfg.out, data_file, &mut files)?)?;
        }
        kind => {
            let density = match kind {
                EstimatorKind::Kernel => {
                    let bw = est_cfg.kernel_bandwidth();
                    if let Bandwidth::Gamma(g) = bw {
                        if let Some(msg) = gamma_delta_warning(g, n, series.delta) {
                            log::warn!("{msg}");
                        }
                    }
                    let h = bw.resolve(n)?;
                    let spec = KernelSpec { grid_points: est_cfg.grid_points, ..KernelSpec::new(h) };
                    let report = estimate_density(&y, &spec, None)?;
                    diag.push(("bandwidth".into(), h));
                    report.density
                }
                EstimatorKind::Wavelet => {
                    let est = wavelet_estimate(&y, &est_cfg.wavelet_spec(), None)?;
                    diag.push(("level".into(), est.level as f64));
                    diag.push(("level_target".into(), est.level_target));
                    diag.push(("truncation".into(), est.truncation as f64));
                    est.write_coefficients_csv(create(&cfg.out, "coefficients.csv", &mut files)?)?;
                    est.density
                }
                EstimatorKind::Ppe => {
                    let grid = wavelet::default_grid(&y, est_cfg.grid_points)?;
                    let est = select_and_estimate(&y, &est_cfg.ppe_config(), &grid)?;
                    let chosen = &est.fits[est.selected];
                    diag.push(("selected_level".into(), chosen.level as f64));
                    diag.push(("kn".into(), est.kn as f64));
                    diag.push(("contrast".into(), chosen.contrast));
                    diag.push(("penalty".into(), chosen.penalty));
                    est.write_levels_csv(create(&cfg.out, "levels.csv", &mut files)?)?;
                    est.density
                }
                EstimatorKind::Regression => unreachable!(),
            };
            let header = if kind == EstimatorKind::Wavelet { "ghat" } else { "fhat" };
            data_file = "density.csv";
            density.write_csv(create(&cfg.out, data_file, &mut files)?, header)?;
            diag.push(("mass".into(), density.integral()));
            diag.push(("mode_count".into(), mode_count(&density, MODE_PROMINENCE) as f64));
            if let Ok(fit) = normal_fit(&density) {
                diag.push(("fit_mean".into(), fit.mean));
                diag.push(("fit_variance".into(), fit.variance));
                let _ = write!(
                    extra_plot,
                    ", \\\n     exp(-(x - ({m:e}))**2 / (2 * {v:e})) / sqrt(2 * pi * {v:e}) title 'normal fit' dashtype 2",
                    m = fit.mean,
                    v = fit.variance
                );
            }
        }
    }

    write_diagnostics(est_cfg.kind, &diag, create(&cfg.out, "diagnostics.csv", &mut files)?)?;
    fs::write(push(&cfg.out, "config.toml", &mut files), cfg.options.to_text())?;
    fs::write(push(&cfg.out, "plot.gp", &mut files), plot_script(est_cfg.kind, data_file, &extra_plot))?;
    Ok(PipelineOutput { files, diagnostics: diag })
}

/// Grid over the central 90% of the regressors, shifted to the `ξ` scale.
pub fn regression_grid(y: &[f64], points: usize) -> Vec<f64> {
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| sorted[((sorted.len() - 1) as f64 * p).round() as usize];
    linspace(q(0.05) - NOISE_MEAN, q(0.95) - NOISE_MEAN, points)
}

fn push(dir: &Path, name: &str, files: &mut Vec<PathBuf>) -> PathBuf {
    let p = dir.join(name);
    files.push(p.clone());
    p
}

fn create(dir: &Path, name: &str, files: &mut Vec<PathBuf>) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(push(dir, name, files))?))
}

fn write_diagnostics<W: std::io::Write>(kind: EstimatorKind, diag: &[(String, f64)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["name", "value"])?;
    w.write_record(["estimator", kind.name()])?;
    for (k, v) in diag {
        w.write_record([k.as_str(), &v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn plot_script(kind: EstimatorKind, data_file: &str, extra: &str) -> String {
    let mut s = String::from("set datafile separator ','\nset key top right\n");
    match kind {
        EstimatorKind::Regression => {
            s.push_str("set xlabel 'log-volatility'\nset ylabel 'm(x)'\n");
            let _ = writeln!(s, "plot '{data_file}' using 1:2 skip 1 with lines title 'regression estimate'");
        }
        _ => {
            s.push_str("set xlabel 'log-volatility'\nset ylabel 'density'\n");
            let _ =
                writeln!(s, "plot '{data_file}' using 1:2 skip 1 with lines title '{} estimate'{extra}", kind.name());
        }
    }
    s
}

/// `Y` values of a scenario, as the pipeline would compute them.
pub fn scenario_observations(cfg: &ScenarioConfig) -> Result<Vec<f64>> {
    let (series, _) = simulate_scenario(cfg)?;
    Ok(log_squared_transform(&series.normalized_increments(), DEFAULT_LOG_FLOOR).y)
}
