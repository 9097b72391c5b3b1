use std::io::Write;

use crate::error::{Error, Result};
use crate::quadrature::trapezoid;

/// Function values on strictly increasing abscissae.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    x: Vec<f64>,
    values: Vec<f64>,
    /// Whether the values may be negative (raw deconvolution estimates).
    pub signed: bool,
}

impl DensityGrid {
    pub fn new(x: Vec<f64>, values: Vec<f64>, signed: bool) -> Result<Self> {
        if x.len() != values.len() {
            return Err(Error::GridMismatch(format!("{} abscissae but {} values", x.len(), values.len())));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::GridMismatch("abscissae must be strictly increasing".into()));
        }
        Ok(Self { x, values, signed })
    }

    pub fn from_fn(x: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = x.iter().map(|&t| f(t)).collect();
        Self::new(x, values, false)
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn integral(&self) -> f64 {
        trapezoid(&self.x, &self.values)
    }

    pub fn same_abscissae(&self, other: &DensityGrid) -> bool {
        self.x.len() == other.x.len()
            && self.x.iter().zip(&other.x).all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0))
    }

    /// Negative values set to zero, then rescaled to unit trapezoid mass.
    pub fn clipped_normalized(&self) -> Result<DensityGrid> {
        let clipped: Vec<f64> = self.values.iter().map(|v| v.max(0.0)).collect();
        let mass = trapezoid(&self.x, &clipped);
        if !(mass > 0.0) {
            return Err(Error::NonPositiveMass(mass));
        }
        Ok(DensityGrid { x: self.x.clone(), values: clipped.iter().map(|v| v / mass).collect(), signed: false })
    }

    pub fn write_csv<W: Write>(&self, out: W, value_header: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", value_header])?;
        for (x, v) in self.x.iter().zip(&self.values) {
            w.write_record([x.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `points` equally spaced abscissae on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (points - 1) as f64;
            (0..points).map(|i| if i + 1 == points { hi } else { lo + step * i as f64 }).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(DensityGrid::new(vec![0.0, 1.0], vec![1.0], false).is_err());
        assert!(DensityGrid::new(vec![0.0, 0.0], vec![1.0, 1.0], false).is_err());
    }

    #[test]
    fn clipping_renormalizes() {
        let g = DensityGrid::new(linspace(0.0, 2.0, 3), vec![-1.0, 2.0, 2.0], true).unwrap();
        let c = g.clipped_normalized().unwrap();
        assert!((c.integral() - 1.0).abs() < 1e-15);
        assert_eq!(c.values()[0], 0.0);
        let neg = DensityGrid::new(linspace(0.0, 1.0, 2), vec![-1.0, -1.0], true).unwrap();
        assert!(matches!(neg.clipped_normalized(), Err(Error::NonPositiveMass(_))));
    }

    #[test]
    fn linspace_endpoints() {
        let x = linspace(-5.0, 5.0, 1001);
        assert_eq!(x[0], -5.0);
        assert_eq!(x[1000], 5.0);
        assert!((x[500]).abs() < 1e-12);
    }
}
