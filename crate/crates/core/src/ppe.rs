//! Penalized projection estimator on the sinc spaces
//! `S_L = span{ψ_{L,j}}`, `ψ_{L,j}(x) = √L sinc(Lx - j)`.
//!
//! For `h ∈ S_L` the empirical contrast is `γ_n(h) = ‖h‖² - (2/n) Σ u_h(Y_i)`
//! with
//!
//! ```text
//! u_h(y) = (1/2π) ∫ e^{iys} h̃(s) / φ_k(s) ds,      E u_h(Y) = ⟨h, g⟩,
//! ```
//!
//! where `h̃(s) = ∫ e^{-isx} h(x) dx`. For the basis functions
//! `u_{ψ_{L,j}}(y) = u_{L,0}(y - j/L)` with
//! `u_{L,0}(y) = (1/2π) L^{-1/2} ∫_{-πL}^{πL} e^{isy} / φ_k(s) ds`.
//! The minimizer over `span{ψ_{L,j} : |j| ≤ K_n}` has coefficients
//! `â_{L,j} = (1/n) Σ_i u_{L,0}(Y_i - j/L)` and contrast `-Σ_j â²_{L,j}`;
//! the level is chosen by minimizing `γ_n(f̂_L) + κ(1 + L)Φ_k(L)/n`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{param, Error, Result};
use crate::fourier::{inverse_fourier_direct, FourierTable, TableSpec};
use crate::grid::DensityGrid;
use crate::kerneldeconv::{check_real, min_max, NoiseModel};
use crate::quadrature::{integrate_with, QuadOptions};

/// Largest level accepted. Coefficients grow like `e^{π²L/2}` and the
/// contrast squares them, so beyond this the criterion leaves the double
/// range for realistic `K_n`.
pub const MAX_LEVEL: usize = 50;
/// Table nodes per basis shift `1/L`.
pub const NODES_PER_SHIFT: usize = 128;
/// Default upper bound on the frequency step of the `u_{L,0}` tables.
pub const DEFAULT_DS_MAX: f64 = 0.01;

/// `ψ_{L,j}(x) = √L sin(π(Lx - j)) / (π(Lx - j))`.
pub fn sinc_basis(level: usize, j: i64, x: f64) -> f64 {
    let l = level as f64;
    let t = l * x - j as f64;
    if t == 0.0 {
        l.sqrt()
    } else {
        l.sqrt() * (PI * t).sin() / (PI * t)
    }
}

fn check_level(level: usize) -> Result<()> {
    if level == 0 {
        return param("projection level must be at least 1");
    }
    if level > MAX_LEVEL {
        return Err(Error::Numeric(format!("level {level} exceeds the overflow bound {MAX_LEVEL}")));
    }
    Ok(())
}

fn u_spectrum(level: usize, noise: NoiseModel) -> impl Fn(f64) -> Complex64 {
    let norm = 1.0 / (level as f64).sqrt();
    move |s| noise.inv_charfn(s) * norm
}

/// `u_{ψ_{L,j}}(y)` by adaptive quadrature over `[-πL, πL]`.
pub fn u_basis_direct(y: f64, level: usize, j: i64, noise: NoiseModel) -> Result<f64> {
    check_level(level)?;
    let x = y - j as f64 / level as f64;
    let v = inverse_fourier_direct(u_spectrum(level, noise), PI * level as f64, x, 1e-11)?;
    check_real(v, x)
}

/// `u_{L,0}` tabulated with spacing `1/(128L)`, so basis shifts land on nodes.
#[derive(Debug, Clone)]
pub struct UBasis {
    level: usize,
    table: FourierTable,
}

impl UBasis {
    /// Table covering `|y - j/L| ≤ reach`.
    pub fn new(level: usize, noise: NoiseModel, reach: f64, ds_max: f64) -> Result<Self> {
        check_level(level)?;
        if !(reach >= 0.0 && reach.is_finite() && ds_max > 0.0) {
            return param(format!("invalid table request: reach {reach}, frequency step {ds_max}"));
        }
        let dx = 1.0 / (NODES_PER_SHIFT * level) as f64;
        let spec = TableSpec { x_max: reach, dx, ds_max, exact_dx: true };
        let table = FourierTable::build(u_spectrum(level, noise), PI * level as f64, spec)?;
        Ok(Self { level, table })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn reach(&self) -> f64 {
        self.table.x_max()
    }

    /// `u_{ψ_{L,j}}(y)`; `None` beyond the table.
    pub fn eval(&self, y: f64, j: i64) -> Option<f64> {
        self.table.eval(y - j as f64 / self.level as f64)
    }

    /// `â_{L,j}` for `|j| ≤ kn`, index `j + kn`.
    pub fn coefficients(&self, y: &[f64], kn: usize) -> Result<Vec<f64>> {
        if y.is_empty() {
            return Err(Error::EmptySeries);
        }
        let (lo, hi) = min_max(y);
        let needed = lo.abs().max(hi.abs()) + kn as f64 / self.level as f64;
        if needed > self.reach() {
            return Err(Error::Parameter(format!("basis table reaches {} but the data need {needed}", self.reach())));
        }
        let k = kn as i64;
        let sums = self.table.lattice_sums(y, NODES_PER_SHIFT, -k, k);
        let inv_n = 1.0 / y.len() as f64;
        Ok(sums.into_iter().map(|s| s * inv_n).collect())
    }
}

/// Table reach needed for data `y` and truncation `kn` at `level`.
pub fn required_reach(y: &[f64], level: usize, kn: usize) -> f64 {
    let (lo, hi) = min_max(y);
    lo.abs().max(hi.abs()) + kn as f64 / level as f64 + 1.0
}

/// `â_{L,j}` for `|j| ≤ kn`, index `j + kn`.
pub fn ppe_coefficients(y: &[f64], level: usize, kn: usize, noise: NoiseModel) -> Result<Vec<f64>> {
    if y.is_empty() {
        return Err(Error::EmptySeries);
    }
    UBasis::new(level, noise, required_reach(y, level, kn), DEFAULT_DS_MAX)?.coefficients(y, kn)
}

/// `γ_n(f̂_L) = -Σ â²`.
pub fn contrast(a_hat: &[f64]) -> f64 {
    -a_hat.iter().map(|a| a * a).sum::<f64>()
}

/// `γ_n(h)` for `h = Σ c_j ψ_{L,j}` given the estimated coefficients on the
/// same index range: `Σ c_j² - 2 Σ c_j â_j`.
pub fn contrast_of(c: &[f64], a_hat: &[f64]) -> Result<f64> {
    if c.len() != a_hat.len() {
        return Err(Error::GridMismatch(format!("{} coefficients against {} estimates", c.len(), a_hat.len())));
    }
    Ok(c.iter().zip(a_hat).map(|(c, a)| c * c - 2.0 * c * a).sum())
}

/// `log Φ_k(L)` with `Φ_k(L) = ∫_{-πL}^{πL} |φ_k(s)|^{-2} ds = (2/π) sinh(π²L)`.
pub fn log_phi_k_integral(level: usize) -> f64 {
    let x = PI * PI * level as f64;
    // log sinh x = x - log 2 + log(1 - e^{-2x})
    (2.0 / PI).ln() + x - 2f64.ln() + (-(-2.0 * x).exp()).ln_1p()
}

/// `Φ_k(L)` in closed form; an error where it leaves the double range.
pub fn phi_k_integral(level: usize) -> Result<f64> {
    let v = (2.0 / PI) * (PI * PI * level as f64).sinh();
    if !v.is_finite() {
        return Err(Error::Numeric(format!("Φ_k({level}) overflows")));
    }
    Ok(v)
}

/// `Φ_k(L)` by quadrature of `1/|φ_k|²` from the characteristic function.
pub fn phi_k_integral_quadrature(level: usize) -> Result<f64> {
    let opts = QuadOptions { rel_tol: 1e-12, abs_tol: 0.0, max_intervals: 4000 };
    let half = integrate_with(|s| NoiseModel::LogChiSquare.inv_charfn(s).norm_sqr(), 0.0, PI * level as f64, opts)?;
    Ok(2.0 * half)
}

/// `Φ(L) = ∫_{-πL}^{πL} |1/φ(s)|² ds` for the given noise.
pub fn phi_integral(noise: NoiseModel, level: usize) -> Result<f64> {
    match noise {
        NoiseModel::LogChiSquare => phi_k_integral(level),
        NoiseModel::Absent => Ok(2.0 * PI * level as f64),
    }
}

/// `pen_n(L) = κ(1 + L)Φ(L)/n`.
pub fn penalty(level: usize, n: usize, kappa: f64, noise: NoiseModel) -> Result<f64> {
    if !(kappa > 0.0) {
        return param(format!("κ must be positive, got {kappa}"));
    }
    if n == 0 {
        return Err(Error::EmptySeries);
    }
    Ok(kappa * (1.0 + level as f64) * phi_integral(noise, level)? / n as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpeConfig {
    pub kappa: f64,
    /// Coefficient truncation `K_n`; `None` means `K_n = n`.
    pub kn: Option<usize>,
    /// Candidate levels; `None` means `{1, …, ⌊log n⌋}`.
    pub levels: Option<Vec<usize>>,
    pub noise: NoiseModel,
    pub grid_points: usize,
    pub ds_max: f64,
}

impl Default for PpeConfig {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            kn: None,
            levels: None,
            noise: NoiseModel::LogChiSquare,
            grid_points: crate::kerneldeconv::DEFAULT_GRID_POINTS,
            ds_max: DEFAULT_DS_MAX,
        }
    }
}

impl PpeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return param(format!("κ must be positive, got {}", self.kappa));
        }
        if self.kn == Some(0) {
            return param("K_n must be at least 1");
        }
        if !(self.ds_max > 0.0) {
            return param("frequency step must be positive");
        }
        Ok(())
    }

    /// Candidate levels that fit the overflow bound, ascending.
    pub fn candidates(&self, n: usize) -> Result<Vec<usize>> {
        let mut all = match &self.levels {
            Some(levels) => levels.clone(),
            None => (1..=((n as f64).ln().floor() as usize).max(1)).collect(),
        };
        all.sort_unstable();
        all.dedup();
        let (usable, blocked): (Vec<usize>, Vec<usize>) = all.into_iter().partition(|&l| (1..=MAX_LEVEL).contains(&l));
        if !blocked.is_empty() {
            log::warn!("levels {blocked:?} are outside 1..={MAX_LEVEL} and were skipped");
        }
        if usable.is_empty() {
            return Err(Error::Config(format!("no candidate level lies within 1..={MAX_LEVEL}")));
        }
        Ok(usable)
    }
}

/// One candidate level.
#[derive(Debug, Clone)]
pub struct LevelFit {
    pub level: usize,
    /// `â_{L,j}` at index `j + K_n`.
    pub coefficients: Vec<f64>,
    pub contrast: f64,
    pub penalty: f64,
}

impl LevelFit {
    pub fn criterion(&self) -> f64 {
        self.contrast + self.penalty
    }

    pub fn render(&self, grid: &[f64]) -> Vec<f64> {
        render(self.level, &self.coefficients, grid)
    }
}

#[derive(Debug, Clone)]
pub struct PpeEstimate {
    pub fits: Vec<LevelFit>,
    /// Index into `fits` of the selected level.
    pub selected: usize,
    pub kn: usize,
    pub density: DensityGrid,
}

impl PpeEstimate {
    pub fn selected_level(&self) -> usize {
        self.fits[self.selected].level
    }

    pub fn fit(&self, level: usize) -> Option<&LevelFit> {
        self.fits.iter().find(|f| f.level == level)
    }

    /// Per-level table `(L, contrast, penalty, selected)`.
    pub fn write_levels_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["L", "contrast", "penalty", "selected"])?;
        for (i, f) in self.fits.iter().enumerate() {
            w.write_record([
                f.level.to_string(),
                f.contrast.to_string(),
                f.penalty.to_string(),
                u8::from(i == self.selected).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `Σ_j a_j ψ_{L,j}(x)` with `j` running over `-K..=K`, `K = (len - 1)/2`.
pub fn render(level: usize, coefficients: &[f64], grid: &[f64]) -> Vec<f64> {
    let k = (coefficients.len() / 2) as i64;
    let l = level as f64;
    let root = l.sqrt();
    grid.par_iter()
        .map(|&x| {
            let t = l * x;
            let s = (PI * t).sin();
            let mut total = 0.0;
            for (idx, a) in coefficients.iter().enumerate() {
                let j = idx as i64 - k;
                let d = t - j as f64;
                total += if d.abs() < 1e-12 {
                    *a
                } else {
                    // sin(π(t - j)) = (-1)^j sin(πt)
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    a * sign * s / (PI * d)
                };
            }
            total * root
        })
        .collect()
}

/// Tables per level, reusable across data sets whose reach they cover.
#[derive(Debug, Clone)]
pub struct PpeBases {
    pub bases: Vec<UBasis>,
}

impl PpeBases {
    pub fn build(
        levels: &[usize],
        noise: NoiseModel,
        reach_at_level: impl Fn(usize) -> f64,
        ds_max: f64,
    ) -> Result<Self> {
        let bases = levels.iter().map(|&l| UBasis::new(l, noise, reach_at_level(l), ds_max)).collect::<Result<_>>()?;
        Ok(Self { bases })
    }

    fn get(&self, level: usize) -> Option<&UBasis> {
        self.bases.iter().find(|b| b.level() == level)
    }
}

/// Fits every candidate level and selects `L̂`.
pub fn select_and_estimate(y: &[f64], config: &PpeConfig, grid: &[f64]) -> Result<PpeEstimate> {
    select_with_bases(y, config, grid, None)
}

/// As [`select_and_estimate`], reusing prebuilt tables where they cover the data.
pub fn select_with_bases(y: &[f64], config: &PpeConfig, grid: &[f64], bases: Option<&PpeBases>) -> Result<PpeEstimate> {
    config.validate()?;
    let n = y.len();
    if n < 3 {
        return Err(Error::TooSmall(format!("the projection estimator needs n ≥ 3, got {n}")));
    }
    let kn = config.kn.unwrap_or(n);
    let mut fits = Vec::new();
    for level in config.candidates(n)? {
        let built;
        let basis = match bases.and_then(|b| b.get(level)) {
            Some(b) if b.reach() >= required_reach(y, level, kn) => b,
            _ => {
                built = UBasis::new(level, config.noise, required_reach(y, level, kn), config.ds_max)?;
                &built
            }
        };
        let coefficients = basis.coefficients(y, kn)?;
        let contrast = contrast(&coefficients);
        let penalty = penalty(level, n, config.kappa, config.noise)?;
        fits.push(LevelFit { level, coefficients, contrast, penalty });
    }
    let mut selected = 0;
    for (i, f) in fits.iter().enumerate() {
        if f.criterion() < fits[selected].criterion() {
            selected = i;
        }
    }
    let values = fits[selected].render(grid);
    Ok(PpeEstimate { fits, selected, kn, density: DensityGrid::new(grid.to_vec(), values, true)? })
}
