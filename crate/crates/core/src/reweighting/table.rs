use crate::corridor::Corridor;
use crate::error::{Error, Result};
use std::io::Write;

/// Fixed y-grid for kernel tables: `n` nodes spanning (g⁻(t) + m, g⁺(t) − m)
/// with m one percent of the local width.
pub fn kernel_grid(k: &Corridor, t: f64, n: usize) -> Vec<f64> {
    let (lo, hi) = (k.lo(t), k.hi(t));
    let m = 0.01 * (hi - lo);
    let (a, b) = (lo + m, hi - m);
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// A kernel tabulated on a y-grid, interpolated by monotone cubics.
///
/// Between the outermost node and the corridor wall the table interpolates
/// linearly towards a known wall value, or holds the last node value when the
/// wall value is unknown. Queries outside the corridor are refused.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    pub name: String,
    pub y: Vec<f64>,
    pub values: Vec<f64>,
    pub std_err: Vec<f64>,
    pub support: (f64, f64),
    pub wall_values: (Option<f64>, Option<f64>),
    slopes: Vec<f64>,
}

impl KernelTable {
    pub fn new(name: impl Into<String>, y: Vec<f64>, values: Vec<f64>, std_err: Vec<f64>, support: (f64, f64)) -> Result<Self> {
        let name = name.into();
        if y.len() < 2 || values.len() != y.len() || std_err.len() != y.len() {
            return Err(Error::Argument(format!("kernel table {name}: needs matching arrays of length ≥ 2")));
        }
        if y.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Argument(format!("kernel table {name}: y-grid must increase")));
        }
        if values.iter().chain(&std_err).any(|v| !v.is_finite()) {
            return Err(Error::Numeric { step: 0, message: format!("kernel table {name} has non-finite entries") });
        }
        if !(support.0 <= y[0] && support.1 >= y[y.len() - 1]) {
            return Err(Error::Argument(format!("kernel table {name}: support does not cover the grid")));
        }
        let slopes = fritsch_carlson(&y, &values);
        Ok(Self { name, y, values, std_err, support, wall_values: (None, None), slopes })
    }

    pub fn with_wall_values(mut self, lower: Option<f64>, upper: Option<f64>) -> Self {
        self.wall_values = (lower, upper);
        self
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Interpolated value and standard error at `y`.
    pub fn eval(&self, y: f64) -> Result<(f64, f64)> {
        let n = self.y.len();
        if !(y >= self.support.0 && y <= self.support.1) {
            return Err(Error::Domain(format!("{}: y = {y} outside [{}, {}]", self.name, self.support.0, self.support.1)));
        }
        if y < self.y[0] {
            return Ok(self.edge(y, 0, self.support.0, self.wall_values.0));
        }
        if y > self.y[n - 1] {
            return Ok(self.edge(y, n - 1, self.support.1, self.wall_values.1));
        }
        let i = match self.y.partition_point(|&v| v <= y) {
            0 => 0,
            p => (p - 1).min(n - 2),
        };
        let h = self.y[i + 1] - self.y[i];
        let s = (y - self.y[i]) / h;
        let (h00, h10, h01, h11) = ((1.0 + 2.0 * s) * (1.0 - s).powi(2), s * (1.0 - s).powi(2), s * s * (3.0 - 2.0 * s), s * s * (s - 1.0));
        let v = h00 * self.values[i] + h10 * h * self.slopes[i] + h01 * self.values[i + 1] + h11 * h * self.slopes[i + 1];
        let se = (1.0 - s) * self.std_err[i] + s * self.std_err[i + 1];
        Ok((v, se))
    }

    fn edge(&self, y: f64, i: usize, wall: f64, wall_value: Option<f64>) -> (f64, f64) {
        match wall_value {
            Some(w) => {
                let s = (y - self.y[i]) / (wall - self.y[i]);
                ((1.0 - s) * self.values[i] + s * w, (1.0 - s) * self.std_err[i])
            }
            None => (self.values[i], self.std_err[i]),
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "y,value,std_err")?;
        for i in 0..self.y.len() {
            writeln!(out, "{},{},{}", self.y[i], self.values[i], self.std_err[i])?;
        }
        Ok(())
    }
}

/// Monotone cubic Hermite slopes: no overshoot between neighbouring nodes.
fn fritsch_carlson(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let d: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
    let mut m = vec![0.0; n];
    m[0] = d[0];
    m[n - 1] = d[n - 2];
    for i in 1..n - 1 {
        m[i] = if d[i - 1] * d[i] <= 0.0 { 0.0 } else { 0.5 * (d[i - 1] + d[i]) };
    }
    for i in 0..n - 1 {
        if d[i] == 0.0 {
            m[i] = 0.0;
            m[i + 1] = 0.0;
            continue;
        }
        let (a, b) = (m[i] / d[i], m[i + 1] / d[i]);
        let r = a * a + b * b;
        if r > 9.0 {
            let tau = 3.0 / r.sqrt();
            m[i] = tau * a * d[i];
            m[i + 1] = tau * b * d[i];
        }
    }
    m
}

/// A density on a y-grid inside a corridor slice, with propagated errors.
///
/// `mass` integrates the values by the trapezoid rule with zero density at
/// both walls; `mass_se` combines node-wise errors (independent) with the
/// error of factors common to every node (fully correlated).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub y: Vec<f64>,
    pub values: Vec<f64>,
    pub std_err: Vec<f64>,
    pub support: (f64, f64),
    pub mass: f64,
    pub mass_se: f64,
    /// Relative error shared by all nodes.
    pub common_rel: f64,
}

impl DensityEstimate {
    /// `node_rel` are node-specific relative errors.
    pub fn from_nodes(y: Vec<f64>, values: Vec<f64>, node_rel: &[f64], common_rel: f64, support: (f64, f64)) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Numeric { step: 0, message: "density estimate has negative or non-finite values".into() });
        }
        let n = y.len();
        let mut xs = Vec::with_capacity(n + 2);
        xs.push(support.0);
        xs.extend_from_slice(&y);
        xs.push(support.1);
        let tw: Vec<f64> = (0..n).map(|i| 0.5 * (xs[i + 2] - xs[i])).collect();
        let mass: f64 = (0..n).map(|i| tw[i] * values[i]).sum();
        let node_var: f64 = (0..n).map(|i| (tw[i] * values[i] * node_rel[i]).powi(2)).sum();
        let mass_se = (node_var + (mass * common_rel).powi(2)).sqrt();
        let std_err = (0..n).map(|i| values[i] * (node_rel[i].powi(2) + common_rel.powi(2)).sqrt()).collect();
        Ok(Self { y, values, std_err, support, mass, mass_se, common_rel })
    }

    /// Trapezoid weights used for `mass`.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let n = self.y.len();
        (0..n)
            .map(|i| {
                let l = if i == 0 { self.support.0 } else { self.y[i - 1] };
                let r = if i + 1 == n { self.support.1 } else { self.y[i + 1] };
                0.5 * (r - l)
            })
            .collect()
    }

    /// The same density scaled to unit mass.
    pub fn renormalized(&self) -> Self {
        let c = 1.0 / self.mass;
        Self {
            values: self.values.iter().map(|v| v * c).collect(),
            std_err: self.std_err.iter().map(|v| v * c).collect(),
            mass: 1.0,
            mass_se: self.mass_se * c,
            ..self.clone()
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "y,value,std_err")?;
        for i in 0..self.y.len() {
            writeln!(out, "{},{},{}", self.y[i], self.values[i], self.std_err[i])?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cubic_reproduces_nodes_and_respects_walls() {
        let y: Vec<f64> = (1..10).map(|i| i as f64 / 10.0).collect();
        let v: Vec<f64> = y.iter().map(|x| x * (1.0 - x)).collect();
        let t = KernelTable::new("q", y.clone(), v.clone(), vec![0.01; 9], (0.0, 1.0)).unwrap().with_wall_values(Some(0.0), None);
        for (a, b) in y.iter().zip(&v) {
            assert!((t.eval(*a).unwrap().0 - b).abs() < 1e-15);
        }
        assert_eq!(t.eval(0.0).unwrap().0, 0.0);
        assert!((t.eval(0.05).unwrap().0 - 0.045).abs() < 1e-12);
        assert_eq!(t.eval(0.95).unwrap().0, v[8]);
        assert!(t.eval(1.01).is_err());
    }

    #[test]
    fn density_mass_of_tent() {
        let y: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
        let v: Vec<f64> = y.iter().map(|x| 4.0 * x.min(1.0 - x)).collect();
        let d = DensityEstimate::from_nodes(y, v, &[0.0; 99], 0.1, (0.0, 1.0)).unwrap();
        assert!((d.mass - 1.0).abs() < 1e-12);
        assert!((d.mass_se - 0.1).abs() < 1e-12);
        assert!((d.quadrature_weights().iter().sum::<f64>() - 0.99).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn interpolation_stays_between_neighbours(vals in prop::collection::vec(0.0f64..10.0, 4..20), u in 0.0f64..1.0) {
            let n = vals.len();
            let y: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let t = KernelTable::new("k", y, vals.clone(), vec![0.0; n], (0.0, (n - 1) as f64)).unwrap();
            let x = u * (n - 1) as f64;
            let i = (x.floor() as usize).min(n - 2);
            let v = t.eval(x).unwrap().0;
            prop_assert!(v >= vals[i].min(vals[i + 1]) - 1e-9 && v <= vals[i].max(vals[i + 1]) + 1e-9);
        }
    }
}
