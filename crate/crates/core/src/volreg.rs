//! Deconvolution Nadaraya–Watson estimator of the autoregression function of
//! log-volatility, `ξ_{t+1} = m(ξ_t) + η_t`, observed as `Y_t = ξ_t + log Z_t²`:
//!
//! ```text
//! m_nh(x) = [(1/nh) Σ_j v_h((x - Y_j)/h) Y_{j+1}] / f_nh(x)
//! ```
//!
//! with the deconvolution kernel `v_h` shared with the density estimator.
//! Since `E[Y_{j+1} | ξ_j] = m(ξ_j) + E log Z²`, the raw ratio estimates
//! `m + E log Z²`; [`RegressionOptions::center_response`] removes the known
//! offset.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::kerneldeconv::{evaluate_sum, kernel_for, DeconvKernel, KernelSpec, NoiseModel, DEFAULT_TABLE_DX};
use crate::noisemodel::NOISE_MEAN;
use crate::svsim::{TruthDensity, AR_BURN_IN};

/// Default `|f_nh|` below which grid points are masked.
pub const DEFAULT_DENOMINATOR_FLOOR: f64 = 1e-4;
/// `|x|` at which the stability ratio `|m(x)/x|` is checked.
pub const STABILITY_PROBES: [f64; 3] = [1e2, 1e3, 1e4];

/// Library of autoregression functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum RegressionFn {
    /// `m(x) = slope·x + intercept`.
    Linear { slope: f64, intercept: f64 },
    /// `m(x) = intercept + amplitude·tanh(x/scale)`.
    Tanh { intercept: f64, amplitude: f64, scale: f64 },
}

impl RegressionFn {
    pub fn linear(slope: f64, intercept: f64) -> Self {
        RegressionFn::Linear { slope, intercept }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            RegressionFn::Linear { slope, intercept } => slope * x + intercept,
            RegressionFn::Tanh { intercept, amplitude, scale } => intercept + amplitude * (x / scale).tanh(),
        }
    }

    /// `|m(x)/x| < 1` at `±10², ±10³, ±10⁴`.
    pub fn check_stability(&self) -> Result<()> {
        if let RegressionFn::Tanh { scale, .. } = *self {
            if !(scale > 0.0 && scale.is_finite()) {
                return param(format!("tanh scale must be positive, got {scale}"));
            }
        }
        for x in STABILITY_PROBES.iter().flat_map(|&p| [p, -p]) {
            let ratio = (self.eval(x) / x).abs();
            if !(ratio < 1.0) {
                return Err(Error::Unstable(format!("|m(x)/x| = {ratio} at x = {x}")));
            }
        }
        Ok(())
    }

    /// Invariant law of `ξ` with `N(0, eta_sd²)` innovations, when known.
    pub fn stationary_law(&self, eta_sd: f64) -> TruthDensity {
        match *self {
            RegressionFn::Linear { slope, intercept } if slope.abs() < 1.0 => {
                TruthDensity::Normal { mean: intercept / (1.0 - slope), sd: eta_sd / (1.0 - slope * slope).sqrt() }
            }
            _ => TruthDensity::Unknown,
        }
    }
}

/// Discrete-time stochastic-volatility scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArScenario {
    pub m: RegressionFn,
    pub eta_sd: f64,
    pub n: usize,
    /// Seeds of the innovation and the measurement streams.
    pub seeds: (u64, u64),
    /// Correlation between `η_t` and `Z_t`; zero gives independent streams.
    #[serde(default)]
    pub correlation: f64,
}

impl ArScenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta_sd > 0.0 && self.eta_sd.is_finite()) {
            return param(format!("innovation standard deviation must be positive, got {}", self.eta_sd));
        }
        if self.n < 2 {
            return param(format!("need at least 2 observations, got {}", self.n));
        }
        if self.seeds.0 == self.seeds.1 {
            return param("innovation and measurement seeds must differ");
        }
        if !(self.correlation.abs() < 1.0) {
            return param(format!("correlation must lie in (-1, 1), got {}", self.correlation));
        }
        self.m.check_stability()
    }
}

/// Observations `Y_t` with the latent `ξ_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArSample {
    pub y: Vec<f64>,
    pub xi: Vec<f64>,
}

/// Iterates the autoregression after a burn-in of 10³ steps and adds
/// independent `log Z²` measurement noise.
pub fn simulate_nonlinear_ar(scenario: &ArScenario) -> Result<ArSample> {
    scenario.validate()?;
    let mut eta_rng = ChaCha8Rng::seed_from_u64(scenario.seeds.0);
    let mut z_rng = ChaCha8Rng::seed_from_u64(scenario.seeds.1);
    let rho = scenario.correlation;
    let rest = (1.0 - rho * rho).sqrt();
    let m = scenario.m;
    let mut x = 0.0;
    for _ in 0..AR_BURN_IN {
        x = m.eval(x) + scenario.eta_sd * normal(&mut eta_rng);
    }
    let mut y = Vec::with_capacity(scenario.n);
    let mut xi = Vec::with_capacity(scenario.n);
    for _ in 0..scenario.n {
        let z = normal(&mut z_rng);
        xi.push(x);
        y.push(x + (z * z).ln());
        let e = normal(&mut eta_rng);
        let eta = if rho == 0.0 { e } else { rho * z + rest * e };
        x = m.eval(x) + scenario.eta_sd * eta;
    }
    Ok(ArSample { y, xi })
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// `h = γ / log n`; warns when `γ ≤ π`.
pub fn default_regression_bandwidth(n: usize, gamma: f64) -> Result<f64> {
    if n < 3 {
        return Err(Error::TooSmall(format!("bandwidth rule needs n ≥ 3, got {n}")));
    }
    if !(gamma > 0.0) {
        return param(format!("γ must be positive, got {gamma}"));
    }
    if gamma <= std::f64::consts::PI {
        log::warn!("γ = {gamma} does not exceed π; the convergence guarantee does not apply");
    }
    Ok(gamma / (n as f64).ln())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionOptions {
    pub denominator_floor: f64,
    /// Subtract `E log Z²` from the responses.
    pub center_response: bool,
    pub noise: NoiseModel,
    pub table_dx: f64,
}

impl Default for RegressionOptions {
    fn default() -> Self {
        Self {
            denominator_floor: DEFAULT_DENOMINATOR_FLOOR,
            center_response: false,
            noise: NoiseModel::LogChiSquare,
            table_dx: DEFAULT_TABLE_DX,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionEstimate {
    pub x: Vec<f64>,
    /// `numerator / denominator`, `NaN` where masked.
    pub mhat: Vec<f64>,
    pub numerator: Vec<f64>,
    /// `f_nh` from the regressors `Y_1, …, Y_{n-1}`.
    pub denominator: Vec<f64>,
    pub masked: Vec<bool>,
}

impl RegressionEstimate {
    pub fn unmasked(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.x.iter().zip(&self.mhat).zip(&self.masked).filter(|(_, m)| !**m).map(|((x, v), _)| (*x, *v))
    }

    /// Columns `(x, mhat, fhat, masked)`; masked `mhat` cells are empty.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "mhat", "fhat", "masked"])?;
        for i in 0..self.x.len() {
            let m = if self.masked[i] { String::new() } else { self.mhat[i].to_string() };
            w.write_record([
                self.x[i].to_string(),
                m,
                self.denominator[i].to_string(),
                u8::from(self.masked[i]).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn responses(y: &[f64], center: bool) -> Vec<f64> {
    let offset = if center { NOISE_MEAN } else { 0.0 };
    y[1..].iter().map(|v| v - offset).collect()
}

/// `m_nh` on `grid` from consecutive pairs `(Y_j, Y_{j+1})`.
pub fn regression_estimate(y: &[f64], h: f64, grid: &[f64], opts: &RegressionOptions) -> Result<RegressionEstimate> {
    if y.len() < 2 {
        return Err(Error::TooSmall(format!("regression needs n ≥ 2, got {}", y.len())));
    }
    if !(opts.denominator_floor >= 0.0) {
        return param("denominator floor must be nonnegative");
    }
    let regressors = &y[..y.len() - 1];
    let spec = KernelSpec { noise: opts.noise, table_dx: opts.table_dx, ..KernelSpec::new(h) };
    let kernel = kernel_for(regressors, grid, &spec)?;
    regression_with_kernel(y, &kernel, grid, opts)
}

pub fn regression_with_kernel(
    y: &[f64],
    kernel: &DeconvKernel,
    grid: &[f64],
    opts: &RegressionOptions,
) -> Result<RegressionEstimate> {
    if y.len() < 2 {
        return Err(Error::TooSmall(format!("regression needs n ≥ 2, got {}", y.len())));
    }
    let regressors = &y[..y.len() - 1];
    let resp = responses(y, opts.center_response);
    let denominator = evaluate_sum(regressors, kernel, grid, |_| 1.0);
    let numerator = evaluate_sum(regressors, kernel, grid, |j| resp[j]);
    let masked: Vec<bool> = denominator.iter().map(|d| !(d.abs() >= opts.denominator_floor)).collect();
    if masked.iter().all(|&m| m) {
        return Err(Error::AllMasked(opts.denominator_floor));
    }
    let mhat =
        numerator.iter().zip(&denominator).zip(&masked).map(|((n, d), &m)| if m { f64::NAN } else { n / d }).collect();
    Ok(RegressionEstimate { x: grid.to_vec(), mhat, numerator, denominator, masked })
}

/// `p_nh(x) = (1/nh) Σ_j v_h((x - Y_j)/h)(Y_{j+1} - m(x))`, so that
/// `m_nh(x) - m(x) = p_nh(x) / f_nh(x)`.
pub fn p_nh(y: &[f64], kernel: &DeconvKernel, grid: &[f64], m: impl Fn(f64) -> f64, center: bool) -> Result<Vec<f64>> {
    if y.len() < 2 {
        return Err(Error::TooSmall(format!("regression needs n ≥ 2, got {}", y.len())));
    }
    let regressors = &y[..y.len() - 1];
    let resp = responses(y, center);
    let h = kernel.bandwidth();
    let scale = 1.0 / (regressors.len() as f64 * h);
    Ok(grid
        .iter()
        .map(|&x| {
            let mx = m(x);
            regressors.iter().enumerate().map(|(j, &v)| kernel.eval((x - v) / h) * (resp[j] - mx)).sum::<f64>() * scale
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::linspace;

    #[test]
    fn stability_check() {
        assert!(RegressionFn::linear(0.5, 1.0).check_stability().is_ok());
        assert!(matches!(RegressionFn::linear(1.0, 0.0).check_stability(), Err(Error::Unstable(_))));
        assert!(RegressionFn::linear(-1.2, 0.0).check_stability().is_err());
        let t = RegressionFn::Tanh { intercept: 0.0, amplitude: 3.0, scale: 1.0 };
        assert!(t.check_stability().is_ok());
        assert_eq!(t.stationary_law(1.0), TruthDensity::Unknown);
        let s = ArScenario { m: RegressionFn::linear(1.0, 0.0), eta_sd: 1.0, n: 10, seeds: (1, 2), correlation: 0.0 };
        assert!(matches!(simulate_nonlinear_ar(&s), Err(Error::Unstable(_))));
    }

    #[test]
    fn constant_regression_gives_iid_normal() {
        let s =
            ArScenario { m: RegressionFn::linear(0.0, 1.5), eta_sd: 0.7, n: 100_000, seeds: (5, 6), correlation: 0.0 };
        let xi = simulate_nonlinear_ar(&s).unwrap().xi;
        let n = xi.len() as f64;
        let mean = xi.iter().sum::<f64>() / n;
        let var = xi.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean - 1.5).abs() < 3.0 * 0.7 / n.sqrt());
        // sd of the sample variance ≈ σ²√(2/n)
        assert!((var - 0.49).abs() < 3.0 * 0.49 * (2.0 / n).sqrt());
    }

    #[test]
    fn linear_regression_stationary_variance() {
        let s =
            ArScenario { m: RegressionFn::linear(0.5, 0.0), eta_sd: 1.0, n: 200_000, seeds: (8, 9), correlation: 0.0 };
        let xi = simulate_nonlinear_ar(&s).unwrap().xi;
        let n = xi.len() as f64;
        let var = xi.iter().map(|v| v * v).sum::<f64>() / n;
        let target = 1.0 / (1.0 - 0.25);
        // AR(1) with φ = 0.5: var of the sample second moment ≈ 2σ⁴(1+φ²)/((1-φ²)n)
        let se = (2.0 * target * target * 1.25 / (0.75 * n)).sqrt();
        assert!((var - target).abs() < 3.0 * se, "{var} vs {target}");
        match RegressionFn::linear(0.5, 0.0).stationary_law(1.0) {
            TruthDensity::Normal { mean, sd } => assert!(mean == 0.0 && (sd - target.sqrt()).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn correlation_knob_correlates_streams() {
        let s =
            ArScenario { m: RegressionFn::linear(0.0, 0.0), eta_sd: 1.0, n: 50_000, seeds: (1, 2), correlation: 0.9 };
        let sample = simulate_nonlinear_ar(&s).unwrap();
        // with m ≡ 0, ξ_{t+1} = η_t, and Z_t = ±exp((Y_t - ξ_t)/2)
        let abs_z: Vec<f64> = sample.y.iter().zip(&sample.xi).map(|(y, x)| ((y - x) / 2.0).exp()).collect();
        let c: f64 =
            abs_z.iter().zip(&sample.xi[1..]).map(|(z, e)| z * e.abs()).sum::<f64>() / (sample.xi.len() - 1) as f64;
        // E|Z||η| grows with |ρ| from 2/π at ρ = 0
        assert!(c > 2.0 / std::f64::consts::PI + 0.05);
    }

    #[test]
    fn constant_response_is_reproduced_exactly() {
        let mut y = vec![0.3, -1.0, 0.8, 2.0, -0.4, 1.1];
        let grid = linspace(-1.0, 1.0, 21);
        // responses Y_{j+1} all equal 0.7
        for v in y.iter_mut().skip(1) {
            *v = 0.7;
        }
        y[0] = -0.2;
        let est =
            regression_estimate(&y, 0.6, &grid, &RegressionOptions { denominator_floor: 0.0, ..Default::default() })
                .unwrap();
        for (i, (_, m)) in est.unmasked().enumerate() {
            assert!((m - 0.7).abs() < 1e-12, "point {i}: {m}");
        }
    }

    #[test]
    fn decomposition_identity() {
        let s = ArScenario { m: RegressionFn::linear(0.5, 0.0), eta_sd: 1.0, n: 400, seeds: (3, 4), correlation: 0.0 };
        let y = simulate_nonlinear_ar(&s).unwrap().y;
        let grid = linspace(-2.0, 2.0, 41);
        let opts = RegressionOptions { center_response: true, ..Default::default() };
        let kernel = kernel_for(&y[..y.len() - 1], &grid, &KernelSpec::new(0.5)).unwrap();
        let est = regression_with_kernel(&y, &kernel, &grid, &opts).unwrap();
        let p = p_nh(&y, &kernel, &grid, |x| 0.5 * x, true).unwrap();
        for i in 0..grid.len() {
            if est.masked[i] {
                continue;
            }
            let lhs = est.mhat[i] - 0.5 * grid[i];
            let rhs = p[i] / est.denominator[i];
            assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0), "x = {}: {lhs} vs {rhs}", grid[i]);
            assert!(
                (est.mhat[i] * est.denominator[i] - est.numerator[i]).abs() < 1e-13 * est.numerator[i].abs().max(1e-3)
            );
        }
    }

    #[test]
    fn shift_equivariance() {
        let y = [0.3, -1.0, 0.8, 2.0, -0.4, 1.1, 0.05];
        let c = 1.7;
        let shifted: Vec<f64> = y.iter().map(|v| v + c).collect();
        let grid = linspace(-1.0, 1.0, 9);
        let grid_s: Vec<f64> = grid.iter().map(|x| x + c).collect();
        let opts = RegressionOptions { denominator_floor: 0.0, ..Default::default() };
        let a = regression_estimate(&y, 0.8, &grid, &opts).unwrap();
        let b = regression_estimate(&shifted, 0.8, &grid_s, &opts).unwrap();
        for i in 0..grid.len() {
            assert!((b.mhat[i] - (a.mhat[i] + c)).abs() < 1e-8 * a.mhat[i].abs().max(1.0));
            assert!((b.denominator[i] - a.denominator[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn masking_and_degenerate_data() {
        let y = [0.0, 0.1, -0.1, 0.05];
        let grid = linspace(40.0, 41.0, 5);
        let r = regression_estimate(&y, 0.5, &grid, &RegressionOptions::default());
        assert!(matches!(r, Err(Error::AllMasked(_))));
        assert!(regression_estimate(&y[..1], 0.5, &grid, &RegressionOptions::default()).is_err());
    }

    #[test]
    fn bandwidth_rule() {
        let n = 10f64.exp().round() as usize;
        let h = default_regression_bandwidth(n, 4.0).unwrap();
        assert!((h - 4.0 / (n as f64).ln()).abs() < 1e-15);
        assert!((h - 0.4).abs() < 1e-5);
        assert!(default_regression_bandwidth(100_000, 4.0).unwrap() < h);
        assert!(default_regression_bandwidth(2, 4.0).is_err());
    }
}
