//! Deconvolution estimators for the invariant density of stochastic
//! volatility, from discretely sampled log prices.
//!
//! Observations enter through the log-squared normalized increments
//! `Y = log((ΔS)²/Δ)`, which behave like `log σ² + log Z²` with `Z` standard
//! normal. The crate provides
//!
//! * [`svsim`] — simulators with known invariant laws;
//! * [`noisemodel`] — density and characteristic function of `log Z²`;
//! * [`kerneldeconv`] — the Fourier deconvolution kernel estimator;
//! * [`wavelet`] — the linear Meyer-wavelet estimator;
//! * [`ppe`] — the penalized sinc-projection estimator;
//! * [`volreg`] — deconvolution regression for autoregressive log-volatility;
//! * [`metrics`] — error metrics and a Monte Carlo harness;
//! * [`pipeline`] — the end-to-end file pipeline behind the CLI.
//!
//! Fourier transforms use `f̃(ω) = ∫ e^{-iωx} f(x) dx` throughout, while
//! characteristic functions are `φ(t) = E e^{itX}`.

// `!(x > 0.0)` is deliberate: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimator;
pub mod fourier;
pub mod grid;
pub mod kerneldeconv;
pub mod metrics;
pub mod noisemodel;
pub mod pipeline;
pub mod ppe;
pub mod quadrature;
pub mod svsim;
pub mod volreg;
pub mod wavelet;

pub use error::{Error, Result};
pub use grid::DensityGrid;
pub use kerneldeconv::{EstimateReport, NoiseModel};
