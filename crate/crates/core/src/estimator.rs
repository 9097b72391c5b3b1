//! Uniform entry point for the three density estimators.

use crate::error::{param, Result};
use crate::grid::DensityGrid;
use crate::kerneldeconv::{default_bandwidth, estimate_density, EstimateReport, KernelSpec};
use crate::ppe::{select_and_estimate, PpeConfig};
use crate::wavelet::{wavelet_estimate, WaveletSpec};

/// Kernel bandwidth, fixed or by the rule `h = γπ / log n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Fixed(f64),
    Gamma(f64),
}

impl Bandwidth {
    pub fn resolve(self, n: usize) -> Result<f64> {
        match self {
            Bandwidth::Fixed(h) if h > 0.0 && h.is_finite() => Ok(h),
            Bandwidth::Fixed(h) => param(format!("bandwidth must be positive, got {h}")),
            Bandwidth::Gamma(g) => default_bandwidth(n, g),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DensityEstimator {
    Kernel { bandwidth: Bandwidth, clip_and_normalize: bool },
    Wavelet(WaveletSpec),
    Ppe(PpeConfig),
}

impl DensityEstimator {
    pub fn name(&self) -> &'static str {
        match self {
            DensityEstimator::Kernel { .. } => "kernel",
            DensityEstimator::Wavelet(_) => "wavelet",
            DensityEstimator::Ppe(_) => "ppe",
        }
    }

    /// Runs the estimator on `y`, evaluated on `grid`.
    pub fn estimate(&self, y: &[f64], grid: &[f64]) -> Result<EstimateReport> {
        match self {
            DensityEstimator::Kernel { bandwidth, clip_and_normalize } => {
                let h = bandwidth.resolve(y.len())?;
                let spec = KernelSpec { clip_and_normalize: *clip_and_normalize, ..KernelSpec::new(h) };
                estimate_density(y, &spec, Some(grid))
            }
            DensityEstimator::Wavelet(spec) => {
                let est = wavelet_estimate(y, spec, Some(grid))?;
                let norm = est.coefficients.iter().map(|a| a * a).sum::<f64>().sqrt();
                Ok(EstimateReport {
                    density: est.density,
                    estimator: "wavelet",
                    diagnostics: vec![
                        ("n".into(), y.len() as f64),
                        ("level".into(), est.level as f64),
                        ("level_target".into(), est.level_target),
                        ("truncation".into(), est.truncation as f64),
                        ("coefficient_norm".into(), norm),
                    ],
                })
            }
            DensityEstimator::Ppe(cfg) => {
                let est = select_and_estimate(y, cfg, grid)?;
                let chosen = &est.fits[est.selected];
                Ok(EstimateReport {
                    estimator: "ppe",
                    diagnostics: vec![
                        ("n".into(), y.len() as f64),
                        ("selected_level".into(), chosen.level as f64),
                        ("kn".into(), est.kn as f64),
                        ("contrast".into(), chosen.contrast),
                        ("penalty".into(), chosen.penalty),
                    ],
                    density: est.density,
                })
            }
        }
    }
}

/// Convenience wrapper returning only the grid.
pub fn estimate_grid(estimator: &DensityEstimator, y: &[f64], grid: &[f64]) -> Result<DensityGrid> {
    Ok(estimator.estimate(y, grid)?.density)
}
