//! Fourier-type deconvolution kernel estimator of the density of `log σ²`:
//!
//! ```text
//! f_nh(x) = (1/nh) Σ_j v_h((x - Y_j) / h),
//! v_h(x)  = (1/2π) ∫ φ_w(s) / φ_k(s/h) e^{-isx} ds,
//! ```
//!
//! with the Wand kernel `φ_w(t) = (1 - t²)³` on `[-1, 1]`. Because `φ_k` has
//! a nonzero phase the kernel `v_h` is real but not symmetric.
//!
//! `1/φ_k(s/h)` is smooth and zero-free on the real line (`Γ(1/2 + it)` has
//! no real zeros), so neither route below needs singularity handling. The
//! bulk evaluation uses a table built by FFT; adaptive quadrature of the
//! defining integral is kept as the reference.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{param, Error, Result};
use crate::fourier::{inverse_fourier_direct, FourierTable, TableSpec, IMAG_ABS_TOL, IMAG_REL_TOL};
use crate::grid::{linspace, DensityGrid};
use crate::noisemodel::inv_noise_charfn;

pub const DEFAULT_GRID_POINTS: usize = 512;
/// Below this `|x|` the Wand kernel uses its Taylor series.
pub const WAND_SERIES_SWITCH: f64 = 0.5;
/// Default node spacing of the `v_h` table.
pub const DEFAULT_TABLE_DX: f64 = 0.02;

/// Noise whose density is deconvolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseModel {
    /// `log Z²` with `Z` standard normal.
    #[default]
    LogChiSquare,
    /// No noise (`φ_k ≡ 1`); reduces the estimators to ordinary kernel and
    /// projection estimators.
    Absent,
}

impl NoiseModel {
    /// `1 / φ_k(t)`.
    #[inline]
    pub fn inv_charfn(self, t: f64) -> Complex64 {
        match self {
            NoiseModel::LogChiSquare => inv_noise_charfn(t),
            NoiseModel::Absent => Complex64::new(1.0, 0.0),
        }
    }
}

/// `w(x) = (48x(x² - 15) cos x - 144(2x² - 5) sin x) / (πx⁷)`.
pub fn wand_kernel(x: f64) -> f64 {
    if x.abs() <= WAND_SERIES_SWITCH {
        // (1/π) Σ (-1)^k x^{2k}/(2k)! · 48/((2k+1)(2k+3)(2k+5)(2k+7))
        let x2 = x * x;
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 0..8 {
            let kf = k as f64;
            let moment = 48.0 / ((2.0 * kf + 1.0) * (2.0 * kf + 3.0) * (2.0 * kf + 5.0) * (2.0 * kf + 7.0));
            sum += term * moment;
            term *= -x2 / ((2.0 * kf + 1.0) * (2.0 * kf + 2.0));
        }
        sum / PI
    } else {
        let (s, c) = x.sin_cos();
        let x2 = x * x;
        (48.0 * x * (x2 - 15.0) * c - 144.0 * (2.0 * x2 - 5.0) * s) / (PI * x2 * x2 * x2 * x)
    }
}

/// `φ_w(t) = (1 - t²)³` on `[-1, 1]`, zero outside.
pub fn wand_charfn(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        let u = 1.0 - t * t;
        u * u * u
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelId {
    /// Wand's kernel, `ρ = 3`, `A = 8`.
    #[default]
    Wand,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub kernel: KernelId,
    pub h: f64,
    pub noise: NoiseModel,
    pub table_dx: f64,
    pub grid_points: usize,
    /// Clip negative values and renormalize the output (off by default).
    pub clip_and_normalize: bool,
}

impl KernelSpec {
    pub fn new(h: f64) -> Self {
        Self {
            kernel: KernelId::Wand,
            h,
            noise: NoiseModel::LogChiSquare,
            table_dx: DEFAULT_TABLE_DX,
            grid_points: DEFAULT_GRID_POINTS,
            clip_and_normalize: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return param(format!("bandwidth must be positive, got {}", self.h));
        }
        if !(self.table_dx > 0.0) {
            return param("table spacing must be positive");
        }
        Ok(())
    }
}

/// `v_h`, tabulated for `|x| ≤ x_max`.
#[derive(Debug, Clone)]
pub struct DeconvKernel {
    h: f64,
    noise: NoiseModel,
    table: FourierTable,
}

fn kernel_spectrum(h: f64, noise: NoiseModel) -> impl Fn(f64) -> Complex64 {
    // v_h(x) = (1/2π) ∫ φ_w(s) / φ_k(-s/h) e^{isx} ds
    move |s| noise.inv_charfn(-s / h) * wand_charfn(s)
}

impl DeconvKernel {
    pub fn new(h: f64, noise: NoiseModel, x_max: f64) -> Result<Self> {
        Self::with_spacing(h, noise, x_max, DEFAULT_TABLE_DX)
    }

    pub fn with_spacing(h: f64, noise: NoiseModel, x_max: f64, dx: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return param(format!("bandwidth must be positive, got {h}"));
        }
        let spec = TableSpec { x_max, dx, ds_max: 2e-3 * h.min(1.0), exact_dx: false };
        let table = FourierTable::build(kernel_spectrum(h, noise), 1.0, spec)?;
        Ok(Self { h, noise, table })
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn x_max(&self) -> f64 {
        self.table.x_max()
    }

    /// `v_h(x)`; falls back to quadrature outside the table.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self.table.eval(x) {
            Some(v) => v,
            None => deconv_kernel_direct(x, self.h, self.noise).unwrap_or(0.0),
        }
    }

    #[inline]
    pub(crate) fn eval_table(&self, x: f64) -> f64 {
        self.table.eval_or_zero(x)
    }
}

/// `v_h(x)` by adaptive Gauss–Kronrod quadrature over `s ∈ [-1, 1]`.
pub fn deconv_kernel_direct(x: f64, h: f64, noise: NoiseModel) -> Result<f64> {
    if !(h > 0.0) {
        return param(format!("bandwidth must be positive, got {h}"));
    }
    let v = inverse_fourier_direct(kernel_spectrum(h, noise), 1.0, x, 1e-10)?;
    check_real(v, x)
}

pub(crate) fn check_real(v: Complex64, x: f64) -> Result<f64> {
    if v.im.abs() > IMAG_REL_TOL * v.re.abs() + IMAG_ABS_TOL {
        return Err(Error::Numeric(format!("imaginary residue {:.3e} at x = {x} (real part {:.3e})", v.im, v.re)));
    }
    Ok(v.re)
}

/// Estimator output with diagnostics.
#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub density: DensityGrid,
    pub estimator: &'static str,
    /// Ordered `(name, value)` pairs.
    pub diagnostics: Vec<(String, f64)>,
}

impl EstimateReport {
    pub fn diagnostic(&self, name: &str) -> Option<f64> {
        self.diagnostics.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }
}

/// Default grid: `points` nodes on `[min Y - 3h, max Y + 3h]`.
pub fn default_grid(y: &[f64], h: f64, points: usize) -> Result<Vec<f64>> {
    if y.is_empty() {
        return Err(Error::EmptySeries);
    }
    let (lo, hi) = min_max(y);
    Ok(linspace(lo - 3.0 * h, hi + 3.0 * h, points.max(2)))
}

pub(crate) fn min_max(y: &[f64]) -> (f64, f64) {
    y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Kernel sized to cover every `(x - Y_j)/h` for `x` in `grid`.
pub fn kernel_for(y: &[f64], grid: &[f64], spec: &KernelSpec) -> Result<DeconvKernel> {
    spec.validate()?;
    let (ylo, yhi) = min_max(y);
    let (glo, ghi) = min_max(grid);
    let reach = (ghi - ylo).abs().max((glo - yhi).abs()) / spec.h;
    DeconvKernel::with_spacing(spec.h, spec.noise, reach + 1.0, spec.table_dx)
}

/// `f_nh` on `grid` (or on the default grid when `None`).
pub fn estimate_density(y: &[f64], spec: &KernelSpec, grid: Option<&[f64]>) -> Result<EstimateReport> {
    if y.is_empty() {
        return Err(Error::EmptySeries);
    }
    spec.validate()?;
    let grid = match grid {
        Some(g) => g.to_vec(),
        None => default_grid(y, spec.h, spec.grid_points)?,
    };
    let kernel = kernel_for(y, &grid, spec)?;
    estimate_with_kernel(y, &kernel, grid, spec.clip_and_normalize)
}

pub fn estimate_with_kernel(y: &[f64], kernel: &DeconvKernel, grid: Vec<f64>, clip: bool) -> Result<EstimateReport> {
    if y.is_empty() {
        return Err(Error::EmptySeries);
    }
    let values = evaluate_sum(y, kernel, &grid, |_| 1.0);
    let mut density = DensityGrid::new(grid, values, true)?;
    if clip {
        density = density.clipped_normalized()?;
    }
    let (lo, hi) = (density.x()[0], density.x()[density.len() - 1]);
    Ok(EstimateReport {
        density,
        estimator: "kernel",
        diagnostics: vec![
            ("h".into(), kernel.bandwidth()),
            ("n".into(), y.len() as f64),
            ("grid_lo".into(), lo),
            ("grid_hi".into(), hi),
        ],
    })
}

/// `(1/nh) Σ_j v_h((x - Y_j)/h) weight(j)` at every grid point.
pub(crate) fn evaluate_sum(
    y: &[f64],
    kernel: &DeconvKernel,
    grid: &[f64],
    weight: impl Fn(usize) -> f64 + Sync,
) -> Vec<f64> {
    let h = kernel.bandwidth();
    let scale = 1.0 / (y.len() as f64 * h);
    let covered = y.iter().all(|&v| {
        let lo = (grid[0] - v) / h;
        let hi = (grid[grid.len() - 1] - v) / h;
        lo.abs().max(hi.abs()) <= kernel.x_max()
    });
    grid.par_iter()
        .map(|&x| {
            let total: f64 = if covered {
                y.iter().enumerate().map(|(j, &v)| kernel.eval_table((x - v) / h) * weight(j)).sum()
            } else {
                y.iter().enumerate().map(|(j, &v)| kernel.eval((x - v) / h) * weight(j)).sum()
            };
            total * scale
        })
        .collect()
}

/// `h = γπ / log n`.
pub fn default_bandwidth(n: usize, gamma: f64) -> Result<f64> {
    if n < 3 {
        return Err(Error::TooSmall(format!("bandwidth rule needs n ≥ 3, got {n}")));
    }
    if !(gamma > 0.0) {
        return param(format!("γ must be positive, got {gamma}"));
    }
    Ok(gamma * PI / (n as f64).ln())
}

/// Warning text when `Δ = n^{-δ}` and `γ ≤ 4/δ`.
pub fn gamma_delta_warning(gamma: f64, n: usize, delta: f64) -> Option<String> {
    if n < 2 || !(delta > 0.0 && delta < 1.0) {
        return None;
    }
    let exponent = -delta.ln() / (n as f64).ln();
    let bound = 4.0 / exponent;
    (gamma <= bound).then(|| {
        format!(
            "γ = {gamma} does not exceed 4/δ = {bound:.4} for Δ = n^-{exponent:.4}; the rate guarantee does not apply"
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, integrate_with, QuadOptions};
    use proptest::prelude::*;

    #[test]
    fn wand_at_zero() {
        assert!((wand_kernel(0.0) - 16.0 / (35.0 * PI)).abs() < 1e-15);
        assert!((wand_kernel(0.0) - 0.145_513).abs() < 1e-6);
    }

    #[test]
    fn wand_series_meets_closed_form() {
        let below = wand_kernel(WAND_SERIES_SWITCH);
        let x = WAND_SERIES_SWITCH * (1.0 + 1e-12);
        assert!((below - wand_kernel(x)).abs() < 1e-10);
        // Oracle: (1/π) ∫_0^1 (1 - t²)³ cos(tx) dt
        for x in [0.1, 0.49, 0.51, 2.0, 9.0] {
            let want = integrate(|t| wand_charfn(t) * (t * x).cos(), 0.0, 1.0).unwrap() / PI;
            assert!((wand_kernel(x) - want).abs() < 1e-11, "x = {x}");
        }
    }

    #[test]
    fn wand_symmetry_and_mass() {
        for x in [0.2, 0.7, 3.3, 17.0] {
            assert_eq!(wand_kernel(-x), wand_kernel(x));
        }
        let opts = QuadOptions { rel_tol: 1e-13, abs_tol: 1e-15, max_intervals: 20_000 };
        // w(x) ~ 48 cos x / (π x⁴), so the tail beyond 2000 is negligible.
        let mass = integrate_with(wand_kernel, -2000.0, 2000.0, opts).unwrap();
        assert!((mass - 1.0).abs() < 1e-8, "mass {mass}");
    }

    #[test]
    fn wand_charfn_values() {
        assert_eq!(wand_charfn(0.0), 1.0);
        assert_eq!(wand_charfn(1.5), 0.0);
        let s: f64 = 1e-3;
        assert!((wand_charfn(1.0 - s) / s.powi(3) / 8.0 - 1.0).abs() < 0.01);
        let d = 1e-4;
        let second = (wand_charfn(d) - 2.0 * wand_charfn(0.0) + wand_charfn(-d)) / (d * d);
        assert!((second + 6.0).abs() < 1e-5);
    }

    #[test]
    fn kernel_without_noise_is_wand() {
        let k = DeconvKernel::new(0.5, NoiseModel::Absent, 40.0).unwrap();
        for x in [-30.0, -2.2, 0.0, 0.4, 5.0, 31.7] {
            assert!((k.eval(x) - wand_kernel(x)).abs() < 1e-9, "x = {x}");
            let d = deconv_kernel_direct(x, 0.5, NoiseModel::Absent).unwrap();
            assert!((d - wand_kernel(x)).abs() < 1e-10);
        }
    }

    #[test]
    fn kernel_is_real_but_asymmetric() {
        let h = 0.5;
        let left = deconv_kernel_direct(-1.5, h, NoiseModel::LogChiSquare).unwrap();
        let right = deconv_kernel_direct(1.5, h, NoiseModel::LogChiSquare).unwrap();
        assert!((left - right).abs() > 1e-3);
        // v_h(-x) is the kernel built from the reflected noise conj(φ_k).
        for x in [0.3, 1.5, 4.0] {
            let reflected =
                inverse_fourier_direct(|s| inv_noise_charfn(-s / h).conj() * wand_charfn(s), 1.0, x, 1e-11).unwrap();
            let direct = deconv_kernel_direct(-x, h, NoiseModel::LogChiSquare).unwrap();
            assert!((reflected.re - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn table_matches_quadrature() {
        let h = 0.4;
        let k = DeconvKernel::new(h, NoiseModel::LogChiSquare, 60.0).unwrap();
        for i in 0..512 {
            let x = -50.0 + 100.0 * i as f64 / 511.0;
            let d = deconv_kernel_direct(x, h, NoiseModel::LogChiSquare).unwrap();
            assert!((k.eval(x) - d).abs() < 1e-6, "x = {x}: {} vs {d}", k.eval(x));
        }
    }

    #[test]
    fn single_observation() {
        let spec = KernelSpec::new(0.6);
        let grid = linspace(-3.0, 3.0, 31);
        let r = estimate_density(&[0.7], &spec, Some(&grid)).unwrap();
        for (x, v) in grid.iter().zip(r.density.values()) {
            let want = deconv_kernel_direct((x - 0.7) / 0.6, 0.6, NoiseModel::LogChiSquare).unwrap() / 0.6;
            assert!((v - want).abs() < 1e-8);
        }
    }

    #[test]
    fn empty_series_rejected() {
        assert!(matches!(estimate_density(&[], &KernelSpec::new(1.0), None), Err(Error::EmptySeries)));
    }

    #[test]
    fn default_grid_span() {
        let y = [-2.0, 1.0, 0.5];
        let r = estimate_density(&y, &KernelSpec::new(0.5), None).unwrap();
        assert_eq!(r.density.len(), DEFAULT_GRID_POINTS);
        assert_eq!(r.density.x()[0], -3.5);
        assert_eq!(r.density.x()[DEFAULT_GRID_POINTS - 1], 2.5);
    }

    #[test]
    fn bandwidth_rule() {
        let n = 10f64.exp().round() as usize;
        let h = default_bandwidth(n, 5.0).unwrap();
        assert!((h - 5.0 * PI / (n as f64).ln()).abs() < 1e-15);
        assert!((h - std::f64::consts::FRAC_PI_2).abs() < 1e-4);
        assert!(default_bandwidth(1000, 1.0).unwrap() > default_bandwidth(2000, 1.0).unwrap());
        assert!(default_bandwidth(2, 1.0).is_err());
        // Δ = n^{-1/2} requires γ > 8.
        let n = 10_000;
        let delta = (n as f64).powf(-0.5);
        assert!(gamma_delta_warning(5.0, n, delta).is_some());
        assert!(gamma_delta_warning(9.0, n, delta).is_none());
    }

    #[test]
    fn clipping_option() {
        let mut spec = KernelSpec::new(0.4);
        spec.clip_and_normalize = true;
        let y = [0.0, 0.1, -0.3, 2.0];
        let r = estimate_density(&y, &spec, None).unwrap();
        assert!(r.density.values().iter().all(|v| *v >= 0.0));
        assert!((r.density.integral() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn shift_equivariance(ys in prop::collection::vec(-4.0f64..4.0, 1..20), c in -3.0f64..3.0) {
            let spec = KernelSpec::new(0.7);
            let grid = linspace(-6.0, 6.0, 41);
            let shifted_y: Vec<f64> = ys.iter().map(|v| v + c).collect();
            let shifted_grid: Vec<f64> = grid.iter().map(|x| x + c).collect();
            let a = estimate_density(&ys, &spec, Some(&grid)).unwrap();
            let b = estimate_density(&shifted_y, &spec, Some(&shifted_grid)).unwrap();
            for (u, v) in a.density.values().iter().zip(b.density.values()) {
                prop_assert!((u - v).abs() < 1e-9);
            }
        }

        #[test]
        fn linear_in_empirical_measure(
            a in prop::collection::vec(-4.0f64..4.0, 1..15),
            b in prop::collection::vec(-4.0f64..4.0, 1..15),
        ) {
            let spec = KernelSpec::new(0.8);
            let grid = linspace(-6.0, 6.0, 25);
            let joint: Vec<f64> = a.iter().chain(&b).cloned().collect();
            let fa = estimate_density(&a, &spec, Some(&grid)).unwrap();
            let fb = estimate_density(&b, &spec, Some(&grid)).unwrap();
            let fj = estimate_density(&joint, &spec, Some(&grid)).unwrap();
            let (na, nb) = (a.len() as f64, b.len() as f64);
            for i in 0..grid.len() {
                let mix = (na * fa.density.values()[i] + nb * fb.density.values()[i]) / (na + nb);
                prop_assert!((mix - fj.density.values()[i]).abs() < 1e-9);
            }
        }
    }
}
