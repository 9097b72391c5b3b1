//! The log-χ²(1) noise `ε = log Z²`, `Z ~ N(0, 1)`: density, characteristic
//! function and the complex log-gamma function needed to evaluate it.
//!
//! Characteristic functions here use the probabilist's convention
//! `φ(t) = E exp(i t ε)`. Modules working with the Fourier transform
//! `f̃(ω) = ∫ exp(-iωx) f(x) dx` bridge the two through `f̃(ω) = conj(φ(ω))`.

use std::f64::consts::{LN_2, PI};
use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Lanczos parameter `g` for [`LANCZOS_COEFFS`].
pub const LANCZOS_G: f64 = 7.0;

/// Lanczos series coefficients for `g = 7`, nine terms (Godfrey's set).
pub const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Beyond this frequency `|φ_k|` is below `e^{-350}` and is returned as zero.
pub const CHARFN_CUTOFF: f64 = 700.0 / PI;

/// `E log Z² = -(γ_E + ln 2)`.
pub const NOISE_MEAN: f64 = -1.270_362_845_461_478_2;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Principal-branch `log Γ(z)`.
///
/// Uses the Lanczos approximation for `Re z ≥ 1/2` and the reflection formula
/// otherwise; in the reflected half plane the imaginary part is only
/// determined modulo `2π`.
pub fn complex_log_gamma(z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round() {
        return Err(Error::Pole(format!("{z}")));
    }
    if z.re < 0.5 {
        let one = Complex64::new(1.0, 0.0);
        let s = (z * PI).sin();
        if s.norm() == 0.0 {
            return Err(Error::Pole(format!("{z}")));
        }
        return Ok(Complex64::new(PI.ln(), 0.0) - s.ln() - lanczos(one - z));
    }
    Ok(lanczos(z))
}

fn lanczos(z: Complex64) -> Complex64 {
    let z = z - 1.0;
    let mut series = Complex64::new(LANCZOS_COEFFS[0], 0.0);
    for (i, &c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        series += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    (z + 0.5) * t.ln() - t + series.ln() + LN_SQRT_2PI
}

/// Density of `log Z²`: `k(x) = exp(x/2 - e^x/2) / √(2π)`.
pub fn noise_density(x: f64) -> f64 {
    (0.5 * x - 0.5 * x.exp() - LN_SQRT_2PI).exp()
}

/// `log φ_k(t) = i t log 2 + log Γ(1/2 + i t) - log √π`.
pub fn log_noise_charfn(t: f64) -> Complex64 {
    if t < 0.0 {
        // exact Hermitian symmetry
        return log_noise_charfn(-t).conj();
    }
    let lg = complex_log_gamma(Complex64::new(0.5, t)).expect("Re z = 1/2 is never a pole");
    Complex64::new(0.0, t * LN_2) + lg - 0.5 * PI.ln()
}

/// `φ_k(t) = 2^{it} Γ(1/2 + it) / √π`.
pub fn noise_charfn(t: f64) -> Complex64 {
    if t.abs() > CHARFN_CUTOFF {
        return Complex64::new(0.0, 0.0);
    }
    log_noise_charfn(t).exp()
}

/// `1 / φ_k(t)`, evaluated in the log domain. Never divides by an underflowed
/// value; overflows to infinity only for `|t|` beyond roughly 450.
pub fn inv_noise_charfn(t: f64) -> Complex64 {
    (-log_noise_charfn(t)).exp()
}

/// Characteristic-function (or Fourier-transform) samples on a symmetric
/// frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CharFnTable {
    pub t: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl CharFnTable {
    /// Samples `f` on `points` equally spaced frequencies covering `[-t_max, t_max]`.
    pub fn from_fn(t_max: f64, points: usize, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        if !(t_max > 0.0) || points < 3 {
            return Err(Error::Parameter("need t_max > 0 and at least 3 points".into()));
        }
        let step = 2.0 * t_max / (points - 1) as f64;
        // built from both ends so the grid is exactly symmetric about 0
        let t: Vec<f64> = (0..points)
            .map(|i| if 2 * i < points { -t_max + step * i as f64 } else { t_max - step * (points - 1 - i) as f64 })
            .collect();
        let values = t.iter().map(|&s| f(s)).collect();
        Ok(Self { t, values })
    }

    pub fn noise(t_max: f64, points: usize) -> Result<Self> {
        Self::from_fn(t_max, points, noise_charfn)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Largest deviation from `φ(-t) = conj(φ(t))` across the table.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.values.len();
        (0..n).map(|i| (self.values[i] - self.values[n - 1 - i].conj()).norm()).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "re", "im"])?;
        for (t, v) in self.t.iter().zip(&self.values) {
            w.write_record([t.to_string(), v.re.to_string(), v.im.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}
