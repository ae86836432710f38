//! Piecewise-linear densities on a grid, with exact sampling by inversion.

use crate::error::{Error, Result};

/// Density proportional to the linear interpolant of `f` over the nodes `x`.
#[derive(Debug, Clone)]
pub struct PiecewiseLinearDensity {
    x: Vec<f64>,
    f: Vec<f64>,
    cdf: Vec<f64>,
}

impl PiecewiseLinearDensity {
    pub fn new(x: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        if x.len() < 2 || x.len() != f.len() {
            return Err(Error::Argument("piecewise-linear density needs ≥ 2 matching nodes".into()));
        }
        if f.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Argument("piecewise-linear density needs increasing nodes and finite non-negative values".into()));
        }
        let mut cdf = vec![0.0; x.len()];
        for i in 0..x.len() - 1 {
            cdf[i + 1] = cdf[i] + 0.5 * (x[i + 1] - x[i]) * (f[i] + f[i + 1]);
        }
        let total = cdf[x.len() - 1];
        if !(total > 0.0) {
            return Err(Error::starvation("piecewise-linear density", "zero total mass"));
        }
        let f = f.into_iter().map(|v| v / total).collect();
        cdf.iter_mut().for_each(|c| *c /= total);
        Ok(Self { x, f, cdf })
    }

    pub fn support(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    pub fn pdf(&self, y: f64) -> f64 {
        let (a, b) = self.support();
        if y < a || y > b {
            return 0.0;
        }
        let i = self.x.partition_point(|&v| v <= y).clamp(1, self.x.len() - 1) - 1;
        let s = (y - self.x[i]) / (self.x[i + 1] - self.x[i]);
        self.f[i] + s * (self.f[i + 1] - self.f[i])
    }

    /// Inverse CDF at `u ∈ (0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c <= u).clamp(1, self.x.len() - 1) - 1;
        let (x0, h) = (self.x[i], self.x[i + 1] - self.x[i]);
        let (f0, f1) = (self.f[i], self.f[i + 1]);
        let target = u - self.cdf[i];
        // Solve f0·s·h + ½(f1 − f0)·s²·h = target for s ∈ [0, 1].
        let a = 0.5 * (f1 - f0) * h;
        let b = f0 * h;
        let s = if a.abs() < 1e-14 * b.abs().max(1e-300) {
            target / b
        } else {
            let disc = (b * b + 4.0 * a * target).max(0.0);
            2.0 * target / (b + disc.sqrt())
        };
        x0 + s.clamp(0.0, 1.0) * h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_density() {
        let d = PiecewiseLinearDensity::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.0]).unwrap();
        assert!((d.pdf(1.0) - 1.0).abs() < 1e-15);
        assert!((d.quantile(0.5) - 1.0).abs() < 1e-12);
        assert!((d.quantile(0.125) - 0.5).abs() < 1e-12);
        for i in 1..100 {
            let u = i as f64 / 100.0;
            let y = d.quantile(u);
            let cdf = if y <= 1.0 { 0.5 * y * y } else { 1.0 - 0.5 * (2.0 - y).powi(2) };
            assert!((cdf - u).abs() < 1e-12);
        }
    }
}
