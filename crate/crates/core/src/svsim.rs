//! Stochastic-volatility simulators with known invariant densities.
//!
//! Volatility factors are sampled with exact Ornstein–Uhlenbeck transitions on
//! a fine grid (`substeps` per sampling gap Δ); the log-price integral
//! `dS = b dt + σ dW` is Euler–Maruyama on the same grid. Volatility and
//! Brownian noise come from two ChaCha8 generators keyed by distinct seeds.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::grid::DensityGrid;
use crate::quadrature::{integrate_with, trapezoid, QuadOptions};
use crate::volreg::RegressionFn;

/// Default fine-grid resolution per sampling gap.
pub const DEFAULT_SUBSTEPS: usize = 16;
/// Default floor applied to squared increments before taking logs.
pub const DEFAULT_LOG_FLOOR: f64 = 1e-300;
/// Steps discarded before recording an autoregressive path.
pub const AR_BURN_IN: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "policy", content = "value")]
pub enum StartPolicy {
    /// Draw the initial value from the stationary law.
    #[default]
    Stationary,
    Fixed(f64),
}

/// `dX = -b (X - μ) dt + a dW`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuParams {
    pub b: f64,
    pub mu: f64,
    pub a: f64,
    #[serde(default)]
    pub start: StartPolicy,
}

impl OuParams {
    pub fn new(b: f64, mu: f64, a: f64) -> Self {
        Self { b, mu, a, start: StartPolicy::Stationary }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0 && self.b.is_finite()) {
            return param(format!("mean reversion b must be positive, got {}", self.b));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return param(format!("diffusion a must be positive, got {}", self.a));
        }
        Ok(())
    }

    pub fn stationary_variance(&self) -> f64 {
        self.a * self.a / (2.0 * self.b)
    }

    /// Mean and variance of `X_{t+dt}` given `X_t = x`.
    pub fn transition_moments(&self, x: f64, dt: f64) -> (f64, f64) {
        let decay = (-self.b * dt).exp();
        let var = self.a * self.a * -(-2.0 * self.b * dt).exp_m1() / (2.0 * self.b);
        (self.mu + (x - self.mu) * decay, var)
    }
}

/// Two OU factors selected by a two-state Markov chain `U`:
/// `ξ = U X¹ + (1 - U) X⁰`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeSwitchParams {
    pub regime0: OuParams,
    pub regime1: OuParams,
    /// Rate of jumps 0 → 1.
    pub rate01: f64,
    /// Rate of jumps 1 → 0.
    pub rate10: f64,
}

impl RegimeSwitchParams {
    pub fn validate(&self) -> Result<()> {
        self.regime0.validate()?;
        self.regime1.validate()?;
        if !(self.rate01 > 0.0 && self.rate10 > 0.0) {
            return param("switching rates must be positive");
        }
        Ok(())
    }

    /// `(π0, π1)` with `π1 = λ01 / (λ01 + λ10)`.
    pub fn stationary_probs(&self) -> (f64, f64) {
        let p1 = self.rate01 / (self.rate01 + self.rate10);
        (1.0 - p1, p1)
    }
}

/// Discrete-time log-volatility `ξ_{t+1} = m(ξ_t) + η_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArVolParams {
    pub m: RegressionFn,
    pub eta_sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum VolModel {
    OuExp(OuParams),
    RegimeSwitchExp(RegimeSwitchParams),
    NonlinearAr(ArVolParams),
}

impl VolModel {
    pub const TAGS: [&'static str; 3] = ["ou-exp", "regime-switch-exp", "nonlinear-ar"];
}

/// Complete, reproducible description of a simulated data set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub model: VolModel,
    /// Constant drift `b_t` of the log price (zero by default).
    #[serde(default)]
    pub drift: f64,
    pub delta: f64,
    pub n: usize,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    pub vol_seed: u64,
    pub price_seed: u64,
}

fn default_substeps() -> usize {
    DEFAULT_SUBSTEPS
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return param(format!("sampling gap must be positive, got {}", self.delta));
        }
        if self.n < 2 {
            return param(format!("need at least 2 observations, got {}", self.n));
        }
        if self.substeps < 1 {
            return param("substeps must be at least 1");
        }
        if self.vol_seed == self.price_seed {
            return param("volatility and price seeds must differ");
        }
        if !self.drift.is_finite() {
            return param("drift must be finite");
        }
        match &self.model {
            VolModel::OuExp(p) => p.validate(),
            VolModel::RegimeSwitchExp(p) => p.validate(),
            VolModel::NonlinearAr(p) => {
                if !(p.eta_sd > 0.0) {
                    return param("innovation standard deviation must be positive");
                }
                p.m.check_stability()
            }
        }
    }

    /// Parses the plain-text key-value form (TOML syntax).
    pub fn from_text(text: &str) -> Result<Self> {
        let doc: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        if let Some(kind) = doc.get("model").and_then(|m| m.get("kind")).and_then(|k| k.as_str()) {
            if !VolModel::TAGS.contains(&kind) {
                return Err(Error::UnknownModel(kind.to_string()));
            }
        }
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(format!("{e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("scenario configs always serialize")
    }
}

/// Invariant density of the simulated log-variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruthDensity {
    Normal {
        mean: f64,
        sd: f64,
    },
    /// `w1 N(mean1, sd1²) + (1 - w1) N(mean0, sd0²)`.
    Mixture {
        w1: f64,
        mean1: f64,
        sd1: f64,
        mean0: f64,
        sd0: f64,
    },
    Unknown,
}

pub fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
}

impl TruthDensity {
    pub fn pdf(&self, x: f64) -> Option<f64> {
        match *self {
            TruthDensity::Normal { mean, sd } => Some(normal_pdf(x, mean, sd)),
            TruthDensity::Mixture { w1, mean1, sd1, mean0, sd0 } => {
                Some(w1 * normal_pdf(x, mean1, sd1) + (1.0 - w1) * normal_pdf(x, mean0, sd0))
            }
            TruthDensity::Unknown => None,
        }
    }

    pub fn on_grid(&self, x: &[f64]) -> Option<DensityGrid> {
        let values = x.iter().map(|&t| self.pdf(t)).collect::<Option<Vec<_>>>()?;
        DensityGrid::new(x.to_vec(), values, false).ok()
    }
}

#[derive(Debug, Clone)]
pub struct VolatilityPath {
    /// σ² on the fine grid, `n · substeps + 1` values.
    pub sigma2: Vec<f64>,
    pub fine_dt: f64,
    pub truth: TruthDensity,
}

/// Sampled log prices `S_0, S_Δ, …, S_{nΔ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSeries {
    pub delta: f64,
    pub log_prices: Vec<f64>,
}

/// Result of the log-squared transform.
#[derive(Debug, Clone, PartialEq)]
pub struct LogSquared {
    pub y: Vec<f64>,
    /// Number of increments whose square fell below the floor.
    pub floored: usize,
}

impl ObservationSeries {
    pub fn new(delta: f64, log_prices: Vec<f64>) -> Result<Self> {
        if !(delta > 0.0) {
            return param(format!("sampling gap must be positive, got {delta}"));
        }
        if log_prices.len() < 2 {
            return Err(Error::TooSmall("need at least two log prices".into()));
        }
        Ok(Self { delta, log_prices })
    }

    pub fn len_increments(&self) -> usize {
        self.log_prices.len() - 1
    }

    /// Raw increments `S_{iΔ} - S_{(i-1)Δ}`.
    pub fn increments(&self) -> Vec<f64> {
        self.log_prices.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// `X_i = (S_{iΔ} - S_{(i-1)Δ}) / √Δ`.
    pub fn normalized_increments(&self) -> Vec<f64> {
        let scale = self.delta.sqrt();
        self.log_prices.windows(2).map(|w| (w[1] - w[0]) / scale).collect()
    }

    /// Series whose increments have their sample mean removed.
    pub fn demeaned(&self) -> Self {
        let inc = self.increments();
        let mean = inc.iter().sum::<f64>() / inc.len() as f64;
        let mut log_prices = Vec::with_capacity(self.log_prices.len());
        let mut s = self.log_prices[0];
        log_prices.push(s);
        for r in inc {
            s += r - mean;
            log_prices.push(s);
        }
        Self { delta: self.delta, log_prices }
    }

    pub fn write_price_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "S"])?;
        for (i, s) in self.log_prices.iter().enumerate() {
            w.write_record([(i as f64 * self.delta).to_string(), s.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_increments_csv<W: Write>(&self, out: W, floor: f64) -> Result<()> {
        let x = self.normalized_increments();
        let y = log_squared_transform(&x, floor);
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "X", "Y"])?;
        for (i, (x, y)) in x.iter().zip(&y.y).enumerate() {
            w.write_record([(i + 1).to_string(), x.to_string(), y.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `Y_i = log(max(X_i², floor))`.
pub fn log_squared_transform(x: &[f64], floor: f64) -> LogSquared {
    let mut floored = 0;
    let y = x
        .iter()
        .map(|&v| {
            let sq = v * v;
            if sq < floor {
                floored += 1;
                floor.ln()
            } else {
                sq.ln()
            }
        })
        .collect();
    LogSquared { y, floored }
}

/// OU path with exact Gaussian transitions, `steps + 1` values.
pub fn simulate_ou<R: Rng + ?Sized>(params: &OuParams, steps: usize, dt: f64, rng: &mut R) -> Result<Vec<f64>> {
    params.validate()?;
    if !(dt > 0.0) || steps < 1 {
        return param("need dt > 0 and at least one step");
    }
    let (_, var) = params.transition_moments(0.0, dt);
    let step_sd = var.sqrt();
    let decay = (-params.b * dt).exp();
    let mut x = match params.start {
        StartPolicy::Stationary => {
            let z: f64 = StandardNormal.sample(rng);
            params.mu + params.stationary_variance().sqrt() * z
        }
        StartPolicy::Fixed(v) => v,
    };
    let mut path = Vec::with_capacity(steps + 1);
    path.push(x);
    for _ in 0..steps {
        let z: f64 = StandardNormal.sample(rng);
        x = params.mu + (x - params.mu) * decay + step_sd * z;
        path.push(x);
    }
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChainStart {
    #[default]
    Stationary,
    Fixed(u8),
}

/// Two-state chain sampled on a grid of step `dt`, `steps + 1` states.
pub fn simulate_markov2<R: Rng + ?Sized>(
    rate01: f64,
    rate10: f64,
    steps: usize,
    dt: f64,
    start: ChainStart,
    rng: &mut R,
) -> Result<Vec<u8>> {
    if !(rate01 > 0.0 && rate10 > 0.0) {
        return param("switching rates must be positive");
    }
    if !(dt > 0.0) {
        return param("dt must be positive");
    }
    let p_up = -(-rate01 * dt).exp_m1();
    let p_down = -(-rate10 * dt).exp_m1();
    let mut state = match start {
        ChainStart::Stationary => u8::from(rng.random::<f64>() < rate01 / (rate01 + rate10)),
        ChainStart::Fixed(s) if s <= 1 => s,
        ChainStart::Fixed(s) => return param(format!("chain state must be 0 or 1, got {s}")),
    };
    let mut path = Vec::with_capacity(steps + 1);
    path.push(state);
    for _ in 0..steps {
        let u: f64 = rng.random();
        let flip = if state == 0 { u < p_up } else { u < p_down };
        if flip {
            state = 1 - state;
        }
        path.push(state);
    }
    Ok(path)
}

/// Stream ids within the volatility generator.
const STREAM_FACTOR0: u64 = 0;
const STREAM_FACTOR1: u64 = 1;
const STREAM_CHAIN: u64 = 2;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// σ² on the fine grid together with the invariant law of `log σ²`.
pub fn simulate_volatility(config: &ScenarioConfig) -> Result<VolatilityPath> {
    config.validate()?;
    let steps = config.n * config.substeps;
    let dt = config.delta / config.substeps as f64;
    let (sigma2, truth) = match &config.model {
        VolModel::OuExp(p) => {
            let path = simulate_ou(p, steps, dt, &mut stream(config.vol_seed, STREAM_FACTOR0))?;
            let truth = TruthDensity::Normal { mean: p.mu, sd: p.stationary_variance().sqrt() };
            (path.into_iter().map(f64::exp).collect(), truth)
        }
        VolModel::RegimeSwitchExp(p) => {
            let x0 = simulate_ou(&p.regime0, steps, dt, &mut stream(config.vol_seed, STREAM_FACTOR0))?;
            let x1 = simulate_ou(&p.regime1, steps, dt, &mut stream(config.vol_seed, STREAM_FACTOR1))?;
            let u = simulate_markov2(
                p.rate01,
                p.rate10,
                steps,
                dt,
                ChainStart::Stationary,
                &mut stream(config.vol_seed, STREAM_CHAIN),
            )?;
            let sigma2 =
                u.iter().zip(x0.iter().zip(&x1)).map(|(&s, (&a, &b))| if s == 1 { b.exp() } else { a.exp() }).collect();
            let (_, w1) = p.stationary_probs();
            let truth = TruthDensity::Mixture {
                w1,
                mean1: p.regime1.mu,
                sd1: p.regime1.stationary_variance().sqrt(),
                mean0: p.regime0.mu,
                sd0: p.regime0.stationary_variance().sqrt(),
            };
            (sigma2, truth)
        }
        VolModel::NonlinearAr(p) => {
            let mut rng = stream(config.vol_seed, STREAM_FACTOR0);
            let xi = ar_path(&p.m, p.eta_sd, config.n, &mut rng);
            let mut sigma2 = Vec::with_capacity(steps + 1);
            for v in &xi[..config.n] {
                sigma2.extend(std::iter::repeat_n(v.exp(), config.substeps));
            }
            sigma2.push(xi[config.n].exp());
            (sigma2, p.m.stationary_law(p.eta_sd))
        }
    };
    Ok(VolatilityPath { sigma2, fine_dt: dt, truth })
}

/// `len + 1` values of the autoregression after burn-in.
pub(crate) fn ar_path<R: Rng + ?Sized>(m: &RegressionFn, eta_sd: f64, len: usize, rng: &mut R) -> Vec<f64> {
    let mut x = 0.0;
    for _ in 0..AR_BURN_IN {
        let z: f64 = StandardNormal.sample(rng);
        x = m.eval(x) + eta_sd * z;
    }
    let mut out = Vec::with_capacity(len + 1);
    out.push(x);
    for _ in 0..len {
        let z: f64 = StandardNormal.sample(rng);
        x = m.eval(x) + eta_sd * z;
        out.push(x);
    }
    out
}

/// Euler–Maruyama log price driven by the price-seed Brownian stream.
pub fn simulate_price(sigma2: &[f64], config: &ScenarioConfig) -> Result<ObservationSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.price_seed);
    simulate_price_with_noise(sigma2, config, || StandardNormal.sample(&mut rng))
}

/// As [`simulate_price`], with the standard normal increments supplied by `noise`.
pub fn simulate_price_with_noise(
    sigma2: &[f64],
    config: &ScenarioConfig,
    mut noise: impl FnMut() -> f64,
) -> Result<ObservationSeries> {
    let expected = config.n * config.substeps + 1;
    if sigma2.len() != expected {
        return Err(Error::PathLength { expected, actual: sigma2.len() });
    }
    let dt = config.delta / config.substeps as f64;
    let sqrt_dt = dt.sqrt();
    let mut s = 0.0;
    let mut log_prices = Vec::with_capacity(config.n + 1);
    log_prices.push(s);
    for chunk in sigma2[..expected - 1].chunks(config.substeps) {
        for &v in chunk {
            s += config.drift * dt + v.sqrt() * sqrt_dt * noise();
        }
        log_prices.push(s);
    }
    ObservationSeries::new(config.delta, log_prices)
}

/// Volatility path, then prices.
pub fn simulate_scenario(config: &ScenarioConfig) -> Result<(ObservationSeries, VolatilityPath)> {
    let vol = simulate_volatility(config)?;
    let series = simulate_price(&vol.sigma2, config)?;
    Ok((series, vol))
}

/// `Y = ξ + log Z²` with i.i.d. `ξ ~ N(mean, sd²)`, returned as `(Y, ξ)`.
pub fn simulate_pure_convolution(n: usize, mean: f64, sd: f64, seeds: (u64, u64)) -> (Vec<f64>, Vec<f64>) {
    let mut signal = ChaCha8Rng::seed_from_u64(seeds.0);
    let mut noise = ChaCha8Rng::seed_from_u64(seeds.1);
    let xi: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut signal);
            mean + sd * z
        })
        .collect();
    let y = xi
        .iter()
        .map(|&x| {
            let z: f64 = StandardNormal.sample(&mut noise);
            x + (z * z).ln()
        })
        .collect();
    (y, xi)
}

/// Invariant density of `dX = b(X) dt + a(X) dB` on `grid`, proportional to
/// `a(x)^{-2} exp(2 ∫_{x0}^x b/a²)` and normalized to unit trapezoid mass.
pub fn invariant_density(
    drift: impl Fn(f64) -> f64,
    diffusion: impl Fn(f64) -> f64,
    x0: f64,
    grid: &[f64],
) -> Result<DensityGrid> {
    if grid.len() < 2 {
        return Err(Error::TooSmall("invariant density needs at least two grid points".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::GridMismatch("abscissae must be strictly increasing".into()));
    }
    for &x in grid.iter().chain(std::iter::once(&x0)) {
        let a = diffusion(x);
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Singularity(x));
        }
    }
    let ratio = |y: f64| {
        let a = diffusion(y);
        drift(y) / (a * a)
    };
    let opts = QuadOptions { rel_tol: 1e-13, abs_tol: 1e-15, max_intervals: 4000 };
    let mut integral = integrate_with(&ratio, x0, grid[0], opts)?;
    let mut log_values = Vec::with_capacity(grid.len());
    for (i, &x) in grid.iter().enumerate() {
        if i > 0 {
            integral += integrate_with(&ratio, grid[i - 1], x, opts)?;
        }
        let a = diffusion(x);
        log_values.push(2.0 * integral - 2.0 * a.ln());
    }
    let peak = log_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut values: Vec<f64> = log_values.iter().map(|v| (v - peak).exp()).collect();
    let mass = trapezoid(grid, &values);
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::Numeric(format!("unnormalizable invariant density (mass {mass})")));
    }
    values.iter_mut().for_each(|v| *v /= mass);
    DensityGrid::new(grid.to_vec(), values, false)
}
