//! Linear Meyer-wavelet deconvolution estimator
//!
//! ```text
//! ĝ_n(x)  = Σ_{|l| ≤ L} â_{m,l} φ_{m,l}(x),     φ_{m,l}(x) = 2^{m/2} φ(2^m x - l),
//! â_{m,l} = (1/n) Σ_i 2^{m/2} U_m(2^m Y_i - l),  Ũ_m(ω) = φ̃(ω) / k̃(-2^m ω).
//! ```
//!
//! Fourier transforms follow `f̃(ω) = ∫ e^{-iωx} f(x) dx`; the noise transform
//! is `k̃(ω) = conj(φ_k(ω))`, so `Ũ_m(ω) = φ̃(ω) / φ_k(2^m ω)`.
//!
//! The scaling function comes from a symmetric probability measure `μ` on
//! `[-π/3, π/3]` through `φ̃(ω) = μ(ω - π, ω + π]^{1/2}`. The CDF of `μ` is
//! `F(x) = sin²(π/2 · ν(1/2 + 3x/(2π)))` with a polynomial bump `ν`, which
//! gives the classical Meyer window `φ̃(ω) = cos(π/2 · ν(3|ω|/(2π) - 1))` on
//! `2π/3 ≤ |ω| ≤ 4π/3`; `φ̃` is as smooth as `ν` (C³ for the default).

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{param, Error, Result};
use crate::fourier::{inverse_fourier_direct, FourierTable, TableSpec};
use crate::grid::{linspace, DensityGrid};
use crate::kerneldeconv::{check_real, min_max, NoiseModel};
use crate::noisemodel::CharFnTable;
use crate::quadrature::trapezoid;

/// Support bound of `φ̃`.
pub const SCALING_BAND: f64 = 4.0 * PI / 3.0;
/// Default node spacing of the `U_m` tables; its reciprocal must be an integer.
pub const DEFAULT_TABLE_DX: f64 = 0.005;
/// Default `|x|` beyond which `U_m` and `φ` are treated as zero.
pub const DEFAULT_SUPPORT_CAP: f64 = 256.0;
/// Highest level whose table stays inside floating-point range.
pub const MAX_LEVEL: u32 = 5;

/// Auxiliary measure `μ` and tabulation resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeyerSpec {
    /// Degree `d` of the bump `ν`, which is C^d at its ends: 2 or 3.
    pub degree: u32,
    /// Upper bound on the frequency step of the `U_m` tables at level 0
    /// (halved per level).
    pub ds_max: f64,
}

impl Default for MeyerSpec {
    fn default() -> Self {
        Self { degree: 3, ds_max: 0.01 }
    }
}

impl MeyerSpec {
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.degree, 2 | 3) {
            return param(format!("bump degree must be 2 or 3 (φ̃ must be C²), got {}", self.degree));
        }
        if !(self.ds_max > 0.0) {
            return param("frequency step must be positive");
        }
        Ok(())
    }

    /// The bump `ν` on `[0, 1]`, clamped outside.
    pub fn bump(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match self.degree {
            2 => x * x * x * (10.0 - 15.0 * x + 6.0 * x * x),
            _ => x.powi(4) * (35.0 - 84.0 * x + 70.0 * x * x - 20.0 * x * x * x),
        }
    }

    /// `F(x)^{1/2}` with `F` the CDF of `μ`.
    fn sqrt_cdf(&self, x: f64) -> f64 {
        (0.5 * PI * self.bump(0.5 + 1.5 * x / PI)).sin()
    }

    /// `μ(a, b]`.
    pub fn measure(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        self.sqrt_cdf(b).powi(2) - self.sqrt_cdf(a).powi(2)
    }
}

/// `φ̃(ω)`.
pub fn meyer_scaling_fourier(omega: f64, spec: &MeyerSpec) -> f64 {
    // μ(ω-π, ω+π] = F(π - |ω|) by the symmetry of μ
    let w = omega.abs();
    if w >= SCALING_BAND {
        return 0.0;
    }
    spec.sqrt_cdf(PI - w)
}

/// `ψ̃(ω) = e^{-iω/2} μ(|ω|/2 - π, |ω| - π]^{1/2}`.
pub fn meyer_wavelet_fourier(omega: f64, spec: &MeyerSpec) -> Complex64 {
    let w = omega.abs();
    let magnitude = if w <= 2.0 * PI / 3.0 || w >= 8.0 * PI / 3.0 {
        0.0
    } else if w <= SCALING_BAND {
        spec.sqrt_cdf(w - PI)
    } else {
        spec.sqrt_cdf(PI - 0.5 * w)
    };
    Complex64::from_polar(magnitude, -0.5 * omega)
}

fn check_level(m: u32) -> Result<()> {
    if m > MAX_LEVEL {
        return param(format!("level {m} exceeds the supported maximum {MAX_LEVEL}"));
    }
    Ok(())
}

fn um_spectrum(m: u32, spec: MeyerSpec, noise: NoiseModel) -> impl Fn(f64) -> Complex64 {
    let scale = (1u64 << m) as f64;
    move |w| noise.inv_charfn(scale * w) * meyer_scaling_fourier(w, &spec)
}

/// `U_m(x)` by adaptive quadrature over `supp φ̃`.
pub fn u_m_direct(x: f64, m: u32, spec: &MeyerSpec, noise: NoiseModel) -> Result<f64> {
    check_level(m)?;
    let v = inverse_fourier_direct(um_spectrum(m, *spec, noise), SCALING_BAND, x, 1e-11)?;
    check_real(v, x)
}

/// `U_m` tabulated on `|x| ≤ cap` with node spacing `1/q`, `q` an integer, so
/// integer shifts land on nodes.
#[derive(Debug, Clone)]
pub struct UmTable {
    level: u32,
    nodes_per_unit: usize,
    cap: f64,
    table: FourierTable,
}

impl UmTable {
    pub fn new(m: u32, spec: &MeyerSpec, noise: NoiseModel, dx: f64, cap: f64) -> Result<Self> {
        spec.validate()?;
        check_level(m)?;
        let q = (1.0 / dx).round();
        if !(dx > 0.0) || (q * dx - 1.0).abs() > 1e-12 {
            return param(format!("table spacing must be the reciprocal of an integer, got {dx}"));
        }
        if !(cap > 0.0) {
            return param("support cap must be positive");
        }
        let ts = TableSpec { x_max: cap, dx: 1.0 / q, ds_max: spec.ds_max / (1u64 << m) as f64, exact_dx: true };
        let table = FourierTable::build(um_spectrum(m, *spec, noise), SCALING_BAND, ts)?;
        Ok(Self { level: m, nodes_per_unit: q as usize, cap, table })
    }

    /// The scaling function `φ` itself (no noise).
    pub fn scaling(spec: &MeyerSpec, dx: f64, cap: f64) -> Result<Self> {
        Self::new(0, spec, NoiseModel::Absent, dx, cap)
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// `U_m(x)`, zero for `|x|` beyond the cap.
    pub fn eval(&self, x: f64) -> f64 {
        if x.abs() > self.cap {
            return 0.0;
        }
        self.table.eval_or_zero(x)
    }

    /// Largest tabulated `|U_m|`.
    pub fn max_abs(&self) -> f64 {
        self.table.node_values().iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// `Σ_i U_m(p_i - l)` for `l` in `l_lo..=l_hi`.
    pub fn shifted_sums(&self, positions: &[f64], l_lo: i64, l_hi: i64) -> Vec<f64> {
        self.table.lattice_sums(positions, self.nodes_per_unit, l_lo, l_hi)
    }
}

/// Truncation `L` of the coefficient index range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    /// `L = n`.
    SampleSize,
    Fixed(usize),
    /// `L = ⌈(log n)^r⌉`.
    LogPower(f64),
}

impl Truncation {
    pub fn resolve(self, n: usize) -> Result<usize> {
        match self {
            Truncation::SampleSize => Ok(n),
            Truncation::Fixed(l) => Ok(l),
            Truncation::LogPower(r) if r > 0.0 => Ok((n as f64).ln().powf(r).ceil() as usize),
            Truncation::LogPower(r) => param(format!("truncation exponent must be positive, got {r}")),
        }
    }
}

/// Detail level `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Level {
    /// `m_n = max(0, round(log₂(log n / (1 + 4π²/3))))`.
    Auto,
    Fixed(u32),
}

/// `log n / (1 + 4π²/3)`, the target value of `2^{m_n}`.
pub fn level_target(n: usize) -> f64 {
    (n as f64).ln() / (1.0 + 4.0 * PI * PI / 3.0)
}

pub fn auto_level(n: usize) -> u32 {
    level_target(n).log2().round().max(0.0) as u32
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveletSpec {
    pub meyer: MeyerSpec,
    pub level: Level,
    pub truncation: Truncation,
    pub noise: NoiseModel,
    pub table_dx: f64,
    pub support_cap: f64,
    pub grid_points: usize,
}

impl Default for WaveletSpec {
    fn default() -> Self {
        Self {
            meyer: MeyerSpec::default(),
            level: Level::Auto,
            truncation: Truncation::SampleSize,
            noise: NoiseModel::LogChiSquare,
            table_dx: DEFAULT_TABLE_DX,
            support_cap: DEFAULT_SUPPORT_CAP,
            grid_points: crate::kerneldeconv::DEFAULT_GRID_POINTS,
        }
    }
}

/// `â_{m,l}` for `l ∈ [-L, L]`, index `l + L`.
pub fn wavelet_coefficients(y: &[f64], table: &UmTable, truncation: usize) -> Result<Vec<f64>> {
    if y.is_empty() {
        return Err(Error::EmptySeries);
    }
    let scale = (1u64 << table.level()) as f64;
    let positions: Vec<f64> = y.iter().map(|v| scale * v).collect();
    let l = truncation as i64;
    // shifts that can reach the data; the rest are zero by the cap
    let (lo, hi) = min_max(&positions);
    let reach_lo = ((lo - table.cap).floor() as i64 - 1).max(-l);
    let reach_hi = ((hi + table.cap).ceil() as i64 + 1).min(l);
    let mut coeffs = vec![0.0; 2 * truncation + 1];
    if reach_lo <= reach_hi {
        let sums = table.shifted_sums(&positions, reach_lo, reach_hi);
        let factor = scale.sqrt() / y.len() as f64;
        for (k, s) in (reach_lo..=reach_hi).zip(sums) {
            coeffs[(k + l) as usize] = s * factor;
        }
    }
    Ok(coeffs)
}

/// `a_{m,l} = ∫ φ_{m,l} g` from the characteristic function `E e^{itξ}` of `g`.
pub fn scaling_coefficient(charfn: impl Fn(f64) -> Complex64, m: u32, l: i64, spec: &MeyerSpec) -> Result<f64> {
    let scale = (1u64 << m) as f64;
    let v = inverse_fourier_direct(
        |w| charfn(scale * w) * meyer_scaling_fourier(w, spec),
        SCALING_BAND,
        -(l as f64),
        1e-11,
    )?;
    check_real(v * scale.sqrt(), l as f64)
}

#[derive(Debug, Clone)]
pub struct WaveletEstimate {
    pub level: u32,
    /// `log n / (1 + 4π²/3)`, recorded next to the realized level.
    pub level_target: f64,
    pub truncation: usize,
    /// `â_{m,l}` at index `l + truncation`.
    pub coefficients: Vec<f64>,
    pub density: DensityGrid,
}

impl WaveletEstimate {
    pub fn coefficient(&self, l: i64) -> f64 {
        let idx = l + self.truncation as i64;
        if idx < 0 {
            return 0.0;
        }
        self.coefficients.get(idx as usize).copied().unwrap_or(0.0)
    }

    pub fn write_coefficients_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["l", "a_hat"])?;
        let l0 = -(self.truncation as i64);
        for (i, a) in self.coefficients.iter().enumerate() {
            w.write_record([(l0 + i as i64).to_string(), a.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `Σ_l a_l φ_{m,l}(x)` on `grid`.
pub fn render(coefficients: &[f64], level: u32, phi: &UmTable, grid: &[f64]) -> Vec<f64> {
    let scale = (1u64 << level) as f64;
    let l0 = -((coefficients.len() / 2) as i64);
    let active: Vec<(f64, f64)> = coefficients
        .iter()
        .enumerate()
        .filter(|(_, a)| **a != 0.0)
        .map(|(i, a)| ((l0 + i as i64) as f64, *a))
        .collect();
    grid.par_iter()
        .map(|&x| {
            let p = scale * x;
            active.iter().filter(|(l, _)| (p - l).abs() <= phi.cap).map(|(l, a)| a * phi.eval(p - l)).sum::<f64>()
                * scale.sqrt()
        })
        .collect()
}

/// Default wavelet grid: `points` nodes on `[min Y - 1, max Y + 1]`.
pub fn default_grid(y: &[f64], points: usize) -> Result<Vec<f64>> {
    if y.is_empty() {
        return Err(Error::EmptySeries);
    }
    let (lo, hi) = min_max(y);
    Ok(linspace(lo - 1.0, hi + 1.0, points.max(2)))
}

/// `ĝ_n` on `grid` (or the default grid).
pub fn wavelet_estimate(y: &[f64], spec: &WaveletSpec, grid: Option<&[f64]>) -> Result<WaveletEstimate> {
    let n = y.len();
    if n < 3 {
        return Err(Error::TooSmall(format!("the wavelet estimator needs n ≥ 3, got {n}")));
    }
    let level = match spec.level {
        Level::Auto => auto_level(n),
        Level::Fixed(m) => m,
    };
    let table = UmTable::new(level, &spec.meyer, spec.noise, spec.table_dx, spec.support_cap)?;
    let phi = UmTable::scaling(&spec.meyer, spec.table_dx, spec.support_cap)?;
    estimate_with_tables(y, spec, &table, &phi, grid)
}

/// As [`wavelet_estimate`] with prebuilt `U_m` and `φ` tables (reusable across
/// data sets of the same level).
pub fn estimate_with_tables(
    y: &[f64],
    spec: &WaveletSpec,
    table: &UmTable,
    phi: &UmTable,
    grid: Option<&[f64]>,
) -> Result<WaveletEstimate> {
    let n = y.len();
    if n < 3 {
        return Err(Error::TooSmall(format!("the wavelet estimator needs n ≥ 3, got {n}")));
    }
    let truncation = spec.truncation.resolve(n)?;
    let coefficients = wavelet_coefficients(y, table, truncation)?;
    let grid = match grid {
        Some(g) => g.to_vec(),
        None => default_grid(y, spec.grid_points)?,
    };
    let values = render(&coefficients, table.level(), phi, &grid);
    Ok(WaveletEstimate {
        level: table.level(),
        level_target: level_target(n),
        truncation,
        coefficients,
        density: DensityGrid::new(grid, values, true)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevNorm {
    pub value: f64,
    /// The integrand had not decayed at the table edge.
    pub truncated: bool,
}

/// Relative integrand size at the table edge above which the norm is flagged.
pub const SOBOLEV_EDGE_TOL: f64 = 1e-8;

/// `‖g‖_α = (∫|g̃(ω)|²(ω² + 1)^α dω)^{1/2}` by the trapezoid rule over the
/// table. With this normalization `‖g‖_0² = 2π ∫g²`.
pub fn sobolev_norm(table: &CharFnTable, alpha: f64) -> Result<SobolevNorm> {
    if table.len() < 2 {
        return Err(Error::TooSmall("Sobolev norm needs at least two frequencies".into()));
    }
    let integrand: Vec<f64> =
        table.t.iter().zip(&table.values).map(|(t, v)| v.norm_sqr() * (t * t + 1.0).powf(alpha)).collect();
    let peak = integrand.iter().fold(0.0_f64, |a, &b| a.max(b));
    let edge = integrand[0].max(integrand[integrand.len() - 1]);
    let truncated = edge > SOBOLEV_EDGE_TOL * peak;
    if truncated {
        log::warn!("Sobolev integrand has not decayed at the table edge (relative size {:.2e})", edge / peak);
    }
    Ok(SobolevNorm { value: trapezoid(&table.t, &integrand).sqrt(), truncated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noisemodel::noise_charfn;

    const SPEC: MeyerSpec = MeyerSpec { degree: 3, ds_max: 0.01 };

    #[test]
    fn scaling_window_values() {
        assert_eq!(meyer_scaling_fourier(0.0, &SPEC), 1.0);
        assert_eq!(meyer_scaling_fourier(2.0, &SPEC), 1.0);
        assert_eq!(meyer_scaling_fourier(SCALING_BAND, &SPEC), 0.0);
        assert_eq!(meyer_scaling_fourier(-7.0, &SPEC), 0.0);
        // classical Meyer form on the transition band
        for w in [2.2, 2.9, 3.6, 4.1] {
            let classical = (0.5 * PI * SPEC.bump(1.5 * w / PI - 1.0)).cos();
            assert!((meyer_scaling_fourier(w, &SPEC) - classical).abs() < 1e-13);
            assert!((meyer_scaling_fourier(w, &SPEC).powi(2) - SPEC.measure(w - PI, w + PI)).abs() < 1e-14);
        }
    }

    #[test]
    fn partition_of_unity() {
        for spec in [SPEC, MeyerSpec { degree: 2, ..SPEC }] {
            for w in [0.3, 1.0, 2.0, 2.5, 3.1] {
                let s: f64 = (-3..=3).map(|l| meyer_scaling_fourier(w + 2.0 * PI * l as f64, &spec).powi(2)).sum();
                assert!((s - 1.0).abs() < 1e-10, "ω = {w}: {s}");
            }
        }
    }

    #[test]
    fn two_scale_relation_and_wavelet_support() {
        assert_eq!(meyer_wavelet_fourier(0.0, &SPEC).norm(), 0.0);
        for w in [-7.9, -5.0, -3.0, -2.3, 1.0, 2.2, 3.7, 4.5, 6.0, 8.1] {
            let psi = meyer_wavelet_fourier(w, &SPEC).norm_sqr();
            let lhs = psi + meyer_scaling_fourier(w, &SPEC).powi(2);
            assert!((lhs - meyer_scaling_fourier(w / 2.0, &SPEC).powi(2)).abs() < 1e-10, "ω = {w}");
            // ψ̃(-ω) e^{-iω/2}... the modulus is even, the phase is e^{-iω/2}
            let mirrored = meyer_wavelet_fourier(-w, &SPEC);
            assert!((mirrored.norm_sqr() - psi).abs() < 1e-15);
            assert!((mirrored - meyer_wavelet_fourier(w, &SPEC).conj()).norm() < 1e-14);
        }
        assert_eq!(meyer_wavelet_fourier(8.0 * PI / 3.0 + 1e-9, &SPEC).norm(), 0.0);
        assert_eq!(meyer_wavelet_fourier(2.0 * PI / 3.0, &SPEC).norm(), 0.0);
    }

    #[test]
    fn rejects_rough_bumps() {
        assert!(MeyerSpec { degree: 1, ..SPEC }.validate().is_err());
        assert!(UmTable::new(MAX_LEVEL + 1, &SPEC, NoiseModel::LogChiSquare, 0.005, 10.0).is_err());
        assert!(UmTable::new(0, &SPEC, NoiseModel::LogChiSquare, 0.003, 10.0).is_err());
    }

    #[test]
    fn noiseless_um_is_scaling_function() {
        let phi = UmTable::scaling(&SPEC, 0.005, 32.0).unwrap();
        for m in [0, 2] {
            for x in [0.0, 0.4, -1.7, 5.3] {
                let u = u_m_direct(x, m, &SPEC, NoiseModel::Absent).unwrap();
                assert!((u - phi.eval(x)).abs() < 1e-9, "m = {m}, x = {x}");
            }
        }
    }

    #[test]
    fn um_table_matches_quadrature() {
        for m in [0, 1] {
            let t = UmTable::new(m, &SPEC, NoiseModel::LogChiSquare, 0.005, 40.0).unwrap();
            for x in [0.0, 0.37, -2.2, 6.75, -19.1] {
                let direct = u_m_direct(x, m, &SPEC, NoiseModel::LogChiSquare).unwrap();
                assert!((t.eval(x) - direct).abs() < 1e-7 * t.max_abs(), "m = {m}, x = {x}: {} vs {direct}", t.eval(x));
            }
        }
    }

    #[test]
    fn um_growth_is_bracketed_by_the_noise_decay() {
        let mut previous = 0.0;
        for m in 0..=2u32 {
            let t = UmTable::new(m, &SPEC, NoiseModel::LogChiSquare, 0.005, 8.0).unwrap();
            let peak = t.max_abs();
            let scale = (1u64 << m) as f64;
            let inner = 1.0 / noise_charfn(scale * 2.0 * PI / 3.0).norm();
            let outer = 1.0 / noise_charfn(scale * SCALING_BAND).norm();
            assert!(inner <= peak && peak <= outer, "m = {m}: {inner} ≤ {peak} ≤ {outer}");
            assert!(peak > 10.0 * previous);
            previous = peak;
        }
    }

    #[test]
    fn scaling_functions_are_orthonormal() {
        // The products are band-limited to |ω| ≤ 8π/3, so the lattice
        // trapezoid rule with step 0.005 is exact up to tail truncation.
        let phi = UmTable::scaling(&SPEC, 0.005, 200.0).unwrap();
        let dx = 0.005;
        for l in -3i64..=3 {
            for k in l..=3 {
                let ip: f64 = (-36_000..=36_000)
                    .map(|i| {
                        let x = i as f64 * dx;
                        phi.eval(x - l as f64) * phi.eval(x - k as f64)
                    })
                    .sum::<f64>()
                    * dx;
                let expected = if l == k { 1.0 } else { 0.0 };
                assert!((ip - expected).abs() < 1e-8, "<φ_{l}, φ_{k}> = {ip}");
            }
        }
    }

    #[test]
    fn projection_reproduces_band_limited_densities() {
        // g̃(ω) = φ̃(2ω)² has support |ω| ≤ 2π/3, inside the level-0 pass band
        let g_tilde = |w: f64| Complex64::new(meyer_scaling_fourier(2.0 * w, &SPEC).powi(2), 0.0);
        let g = |x: f64| inverse_fourier_direct(g_tilde, SCALING_BAND, x, 1e-12).unwrap().re;
        let phi = UmTable::scaling(&SPEC, 0.005, 200.0).unwrap();
        // a_{0,l} = ∫φ(x - l) g(x) dx with E e^{itξ} = conj g̃(t) = g̃(t)
        let coeffs: Vec<f64> = (-40..=40).map(|l| scaling_coefficient(g_tilde, 0, l, &SPEC).unwrap()).collect();
        let grid = [-3.0, -0.5, 0.0, 1.25, 4.0];
        let rendered = render(&coeffs, 0, &phi, &grid);
        for (x, r) in grid.iter().zip(rendered) {
            assert!((r - g(*x)).abs() < 1e-7, "x = {x}: {r} vs {}", g(*x));
        }
    }

    #[test]
    fn coefficients_for_a_single_observation() {
        let t = UmTable::new(1, &SPEC, NoiseModel::LogChiSquare, 0.005, 40.0).unwrap();
        let y = [0.731];
        let a = wavelet_coefficients(&y, &t, 4).unwrap();
        for l in -4i64..=4 {
            let expected = 2f64.sqrt() * t.eval(2.0 * y[0] - l as f64);
            assert!((a[(l + 4) as usize] - expected).abs() < 1e-9 * t.max_abs());
        }
    }

    #[test]
    fn coefficients_are_permutation_invariant_and_linear() {
        let t = UmTable::new(0, &SPEC, NoiseModel::LogChiSquare, 0.005, 40.0).unwrap();
        let y = [0.3, -1.2, 2.5, -4.0, 0.9];
        let rev: Vec<f64> = y.iter().rev().copied().collect();
        let a = wavelet_coefficients(&y, &t, 6).unwrap();
        let b = wavelet_coefficients(&rev, &t, 6).unwrap();
        for (x, z) in a.iter().zip(&b) {
            assert!((x - z).abs() < 1e-12 * t.max_abs());
        }
        let head = wavelet_coefficients(&y[..2], &t, 6).unwrap();
        let tail = wavelet_coefficients(&y[2..], &t, 6).unwrap();
        for i in 0..a.len() {
            let mixed = (2.0 * head[i] + 3.0 * tail[i]) / 5.0;
            assert!((mixed - a[i]).abs() < 1e-12 * t.max_abs());
        }
        assert!(matches!(wavelet_coefficients(&[], &t, 2), Err(Error::EmptySeries)));
    }

    #[test]
    fn level_rule() {
        let target = level_target(10_000);
        assert!((target - 9.210340371976184 / (1.0 + 4.0 * PI * PI / 3.0)).abs() < 1e-15);
        assert!((target - 0.6505).abs() < 1e-3);
        assert_eq!(auto_level(10_000), 0);
        assert_eq!(auto_level(100), 0);
        assert_eq!(Truncation::SampleSize.resolve(77).unwrap(), 77);
        assert_eq!(Truncation::LogPower(1.0).resolve(100).unwrap(), 5);
    }

    #[test]
    fn estimate_grid_is_sum_of_scaled_scaling_functions() {
        let y = [0.1, -0.4, 0.7, -2.0];
        let spec = WaveletSpec { truncation: Truncation::Fixed(30), support_cap: 64.0, ..Default::default() };
        let grid = linspace(-3.0, 3.0, 7);
        let est = wavelet_estimate(&y, &spec, Some(&grid)).unwrap();
        assert_eq!(est.level, 0);
        let phi = UmTable::scaling(&spec.meyer, spec.table_dx, spec.support_cap).unwrap();
        for (x, v) in grid.iter().zip(est.density.values()) {
            let direct: f64 = (-30i64..=30).map(|l| est.coefficient(l) * phi.eval(x - l as f64)).sum();
            assert!((direct - v).abs() < 1e-9);
        }
        assert!(matches!(wavelet_estimate(&y[..2], &spec, None), Err(Error::TooSmall(_))));
    }

    #[test]
    fn sobolev_norm_of_standard_normal() {
        let table = CharFnTable::from_fn(12.0, 24_001, |t| Complex64::new((-0.5 * t * t).exp(), 0.0)).unwrap();
        let n0 = sobolev_norm(&table, 0.0).unwrap();
        assert!(!n0.truncated);
        // 2π ∫g² = 2π / (2√π) = √π
        assert!((n0.value.powi(2) - PI.sqrt()).abs() < 1e-10);
        let mut last = n0.value;
        for alpha in [0.5, 1.0, 2.0, 3.0] {
            let v = sobolev_norm(&table, alpha).unwrap().value;
            assert!(v >= last);
            last = v;
        }
        let short = CharFnTable::from_fn(1.0, 101, |t| Complex64::new((-0.5 * t * t).exp(), 0.0)).unwrap();
        assert!(sobolev_norm(&short, 1.0).unwrap().truncated);
    }
}
