//! Drift models μ, the Girsanov scalars G and N, the c_μ bound, the
//! Cameron–Martin factors Z and Z̃, and the Lamperti reduction of a general
//! SDE dU = ν(U)dt + σ(U)dW to unit diffusion.

use crate::corridor::{Corridor, Curve, SamplePath, TabulatedCurve, TimeGrid};
use crate::error::{Error, Result};
use crate::quad::{adaptive_simpson, gauss_legendre8, golden_section_max};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

const G_TOL: f64 = 1e-10;

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn horner_d1(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, &c)| acc * x + k as f64 * c)
}

fn horner_d2(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().enumerate().skip(2).rev().fold(0.0, |acc, (k, &c)| acc * x + (k * (k - 1)) as f64 * c)
}

/// μ and μ′ sampled on a uniform spatial grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulatedDrift {
    pub x_start: f64,
    pub x_end: f64,
    pub mu: Vec<f64>,
    pub dmu: Vec<f64>,
}

impl TabulatedDrift {
    fn step(&self) -> f64 {
        (self.x_end - self.x_start) / (self.mu.len() - 1) as f64
    }

    fn validate(&self) -> Result<()> {
        let n = self.mu.len();
        if n < 2 || self.dmu.len() != n || !(self.x_start < self.x_end) {
            return Err(Error::Model("tabulated drift needs ≥ 2 nodes, matching μ/μ′ tables and x_start < x_end".into()));
        }
        if self.mu.iter().chain(&self.dmu).any(|v| !v.is_finite()) {
            return Err(Error::Model("tabulated drift has non-finite entries".into()));
        }
        Ok(())
    }

    fn eval(&self, x: f64) -> (f64, f64) {
        let n = self.mu.len() - 1;
        if x <= self.x_start {
            return (self.mu[0] + self.dmu[0] * (x - self.x_start), self.dmu[0]);
        }
        if x >= self.x_end {
            return (self.mu[n] + self.dmu[n] * (x - self.x_end), self.dmu[n]);
        }
        let h = self.step();
        let s = (x - self.x_start) / h;
        let i = (s.floor() as usize).min(n - 1);
        let s = s - i as f64;
        let (y0, y1, m0, m1) = (self.mu[i], self.mu[i + 1], self.dmu[i] * h, self.dmu[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let v = (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * m1;
        (v, self.dmu[i] + s * (self.dmu[i + 1] - self.dmu[i]))
    }
}

/// Drift μ of the unit-diffusion SDE dX = μ(X)dt + dW.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftModel {
    #[default]
    Zero,
    Constant { c: f64 },
    /// μ(x) = a + b·x
    Linear { a: f64, b: f64 },
    /// μ(x) = Σ coeffs[k]·x^k
    Polynomial { coeffs: Vec<f64> },
    Tabulated(TabulatedDrift),
    /// Numerically Lamperti-transformed drift.
    #[serde(skip)]
    Lamperti(Arc<NumericLamperti>),
}

impl PartialEq for DriftModel {
    fn eq(&self, other: &Self) -> bool {
        use DriftModel::*;
        match (self, other) {
            (Zero, Zero) => true,
            (Constant { c: a }, Constant { c: b }) => a == b,
            (Linear { a, b }, Linear { a: c, b: d }) => a == c && b == d,
            (Polynomial { coeffs: a }, Polynomial { coeffs: b }) => a == b,
            (Tabulated(a), Tabulated(b)) => a == b,
            (Lamperti(a), Lamperti(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl std::fmt::Display for DriftModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DriftModel::Zero => write!(f, "mu(x) = 0"),
            DriftModel::Constant { c } => write!(f, "mu(x) = {c}"),
            DriftModel::Linear { a, b } => write!(f, "mu(x) = {a} + {b} x"),
            DriftModel::Polynomial { coeffs } => {
                let terms: Vec<String> = coeffs.iter().enumerate().map(|(k, c)| format!("{c} x^{k}")).collect();
                write!(f, "mu(x) = {}", terms.join(" + "))
            }
            DriftModel::Tabulated(t) => write!(f, "tabulated mu on [{}, {}] ({} nodes)", t.x_start, t.x_end, t.mu.len()),
            DriftModel::Lamperti(l) => write!(f, "Lamperti drift nu/sigma - sigma'/2 with nu = {:?}, sigma = {:?}", l.nu.0, l.sigma.0),
        }
    }
}

impl DriftModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            DriftModel::Constant { c } if !c.is_finite() => Err(Error::Model("non-finite constant drift".into())),
            DriftModel::Linear { a, b } if !(a.is_finite() && b.is_finite()) => {
                Err(Error::Model("non-finite linear drift".into()))
            }
            DriftModel::Polynomial { coeffs } if coeffs.iter().any(|c| !c.is_finite()) => {
                Err(Error::Model("non-finite polynomial drift".into()))
            }
            DriftModel::Tabulated(t) => t.validate(),
            _ => Ok(()),
        }
    }

    /// True when μ ≡ 0, so every Girsanov weight is exactly 1.
    pub fn is_zero(&self) -> bool {
        match self {
            DriftModel::Zero => true,
            DriftModel::Constant { c } => *c == 0.0,
            DriftModel::Linear { a, b } => *a == 0.0 && *b == 0.0,
            DriftModel::Polynomial { coeffs } => coeffs.iter().all(|&c| c == 0.0),
            _ => false,
        }
    }

    /// Some(c) when μ ≡ c.
    pub fn constant_value(&self) -> Option<f64> {
        match self {
            DriftModel::Zero => Some(0.0),
            DriftModel::Constant { c } => Some(*c),
            DriftModel::Linear { a, b } if *b == 0.0 => Some(*a),
            DriftModel::Polynomial { coeffs } if coeffs.iter().skip(1).all(|&c| c == 0.0) => {
                Some(coeffs.first().copied().unwrap_or(0.0))
            }
            _ => None,
        }
    }

    pub fn mu(&self, x: f64) -> f64 {
        match self {
            DriftModel::Zero => 0.0,
            DriftModel::Constant { c } => *c,
            DriftModel::Linear { a, b } => a + b * x,
            DriftModel::Polynomial { coeffs } => horner(coeffs, x),
            DriftModel::Tabulated(t) => t.eval(x).0,
            DriftModel::Lamperti(l) => l.mu(x),
        }
    }

    pub fn dmu(&self, x: f64) -> f64 {
        match self {
            DriftModel::Zero | DriftModel::Constant { .. } => 0.0,
            DriftModel::Linear { b, .. } => *b,
            DriftModel::Polynomial { coeffs } => horner_d1(coeffs, x),
            DriftModel::Tabulated(t) => t.eval(x).1,
            DriftModel::Lamperti(l) => l.dmu(x),
        }
    }

    /// μ′(x) + μ(x)², the integrand of N.
    pub fn phi(&self, x: f64) -> f64 {
        match self {
            DriftModel::Zero => 0.0,
            DriftModel::Constant { c } => c * c,
            DriftModel::Linear { a, b } => {
                let m = a + b * x;
                b + m * m
            }
            _ => {
                let m = self.mu(x);
                self.dmu(x) + m * m
            }
        }
    }

    /// G(y) = ∫₀^y μ.
    pub fn big_g(&self, y: f64) -> Result<f64> {
        match self {
            DriftModel::Zero => Ok(0.0),
            DriftModel::Constant { c } => Ok(c * y),
            DriftModel::Linear { a, b } => Ok(a * y + 0.5 * b * y * y),
            DriftModel::Polynomial { coeffs } => {
                Ok(coeffs.iter().enumerate().rev().fold(0.0, |acc, (k, &c)| acc * y + c / (k + 1) as f64) * y)
            }
            DriftModel::Tabulated(_) => adaptive_simpson(&|x| self.mu(x), 0.0, y, G_TOL),
            DriftModel::Lamperti(l) => l.big_g(y),
        }
    }
}

/// G(y) = ∫₀^y μ.
pub fn eval_g(d: &DriftModel, y: f64) -> Result<f64> {
    d.big_g(y)
}

/// N(w) = ∫ (μ′ + μ²)(w(u)) du by the trapezoid rule on the path grid.
pub fn eval_n(d: &DriftModel, w: &SamplePath) -> f64 {
    n_functional(d, w.values(), w.grid().dt())
}

/// N over raw node values with step `dt`.
pub fn n_functional(d: &DriftModel, values: &[f64], dt: f64) -> f64 {
    if d.is_zero() || values.len() < 2 {
        return 0.0;
    }
    if let Some(c) = d.constant_value() {
        return c * c * dt * (values.len() - 1) as f64;
    }
    let n = values.len();
    let inner: f64 = values[1..n - 1].iter().map(|&x| d.phi(x)).sum();
    dt * (inner + 0.5 * (d.phi(values[0]) + d.phi(values[n - 1])))
}

/// c_μ = 0 ∨ sup{−(μ′ + μ²)(y)} over [min g⁻ − δ, max g⁺ + δ].
pub fn c_mu_bound(d: &DriftModel, k: &Corridor, delta: f64) -> f64 {
    if d.is_zero() {
        return 0.0;
    }
    let (lo, hi) = k.envelope();
    let (a, b) = (lo - delta, hi + delta);
    let n = 4096;
    let h = (b - a) / n as f64;
    let f = |x: f64| -d.phi(x);
    let (mut best_i, mut best) = (0usize, f64::NEG_INFINITY);
    for i in 0..=n {
        let v = f(a + i as f64 * h);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let left = a + best_i.saturating_sub(1) as f64 * h;
    let right = (a + (best_i + 1) as f64 * h).min(b);
    let (_, refined) = golden_section_max(&f, left, right, 1e-12 * (1.0 + (b - a)));
    best.max(refined).max(0.0)
}

/// Precomputed Cameron–Martin data for a curve g on a fixed grid.
///
/// With g′ᵢ = g′(tᵢ) the discrete exponent is
/// `g′ₙwₙ − g′₀w₀ − Σ ½(wᵢ + wᵢ₊₁)(g′ᵢ₊₁ − g′ᵢ) ∓ ½J`,
/// where `J = Σ ½(g′ᵢ + g′ᵢ₊₁)(gᵢ₊₁ − gᵢ)`. Both sums are trapezoid rules written
/// against the increments of g′ and g, so summation by parts holds exactly and
/// Z̃(w) = Z(w + g) up to rounding.
#[derive(Debug, Clone)]
pub struct CameronMartin {
    dg: Vec<f64>,
    j: f64,
}

impl CameronMartin {
    pub fn new(g: &Curve, grid: &TimeGrid) -> Self {
        let times = grid.times();
        let dg: Vec<f64> = times.iter().map(|&t| g.d1(t)).collect();
        let gv: Vec<f64> = times.iter().map(|&t| g.value(t)).collect();
        let j = (0..grid.n_steps()).map(|i| 0.5 * (dg[i] + dg[i + 1]) * (gv[i + 1] - gv[i])).sum();
        Self { dg, j }
    }

    pub fn is_trivial(&self) -> bool {
        self.dg.iter().all(|&v| v == 0.0)
    }

    fn core(&self, w: &[f64]) -> f64 {
        let n = self.dg.len() - 1;
        let mut s = self.dg[n] * w[n] - self.dg[0] * w[0];
        for i in 0..n {
            s -= 0.5 * (w[i] + w[i + 1]) * (self.dg[i + 1] - self.dg[i]);
        }
        s
    }

    /// ln Z^g(w).
    pub fn log_z(&self, w: &[f64]) -> f64 {
        if self.is_trivial() {
            return 0.0;
        }
        self.core(w) - 0.5 * self.j
    }

    /// ln Z̃^g(w) = ln Z^g(w + g).
    pub fn log_z_tilde(&self, w: &[f64]) -> f64 {
        if self.is_trivial() {
            return 0.0;
        }
        self.core(w) + 0.5 * self.j
    }
}

pub fn log_cameron_martin_z(g: &Curve, w: &SamplePath) -> f64 {
    CameronMartin::new(g, w.grid()).log_z(w.values())
}

pub fn log_cameron_martin_z_tilde(g: &Curve, w: &SamplePath) -> f64 {
    CameronMartin::new(g, w.grid()).log_z_tilde(w.values())
}

pub fn cameron_martin_z(g: &Curve, w: &SamplePath) -> f64 {
    log_cameron_martin_z(g, w).exp()
}

pub fn cameron_martin_z_tilde(g: &Curve, w: &SamplePath) -> f64 {
    log_cameron_martin_z_tilde(g, w).exp()
}

/// Polynomial in the state variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatePoly(pub Vec<f64>);

impl StatePoly {
    pub fn value(&self, u: f64) -> f64 {
        horner(&self.0, u)
    }
    pub fn d1(&self, u: f64) -> f64 {
        horner_d1(&self.0, u)
    }
    pub fn d2(&self, u: f64) -> f64 {
        horner_d2(&self.0, u)
    }
    fn is_constant(&self) -> bool {
        self.0.iter().skip(1).all(|&c| c == 0.0)
    }
}

/// dU = ν(U)dt + σ(U)dW with polynomial ν, σ; σ must be positive on `range`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeModel {
    pub nu: Vec<f64>,
    pub sigma: Vec<f64>,
    /// State range [u_lo, u_hi] containing 0 on which the transform is built.
    pub range: [f64; 2],
}

const LAMPERTI_CELLS: usize = 4096;

/// Tabulated scale map L(u) = ∫₀^u 1/σ and the induced unit-diffusion drift.
#[derive(Debug)]
pub struct NumericLamperti {
    nu: StatePoly,
    sigma: StatePoly,
    u: Vec<f64>,
    l: Vec<f64>,
}

impl NumericLamperti {
    fn build(nu: StatePoly, sigma: StatePoly, u_lo: f64, u_hi: f64) -> Result<Self> {
        let h = (u_hi - u_lo) / LAMPERTI_CELLS as f64;
        let u: Vec<f64> = (0..=LAMPERTI_CELLS).map(|i| u_lo + i as f64 * h).collect();
        let inv = |x: f64| 1.0 / sigma.value(x);
        let mut l = vec![0.0; LAMPERTI_CELLS + 1];
        for i in 0..LAMPERTI_CELLS {
            l[i + 1] = l[i] + gauss_legendre8(&inv, u[i], u[i + 1]);
        }
        let mut me = Self { nu, sigma, u, l };
        let l0 = me.l_from_table(0.0);
        me.l.iter_mut().for_each(|v| *v -= l0);
        Ok(me)
    }

    fn cell(&self, u: f64) -> usize {
        let h = self.u[1] - self.u[0];
        (((u - self.u[0]) / h).floor().max(0.0) as usize).min(LAMPERTI_CELLS - 1)
    }

    fn l_from_table(&self, u: f64) -> f64 {
        let i = self.cell(u);
        self.l[i] + gauss_legendre8(&|x| 1.0 / self.sigma.value(x), self.u[i], u)
    }

    /// L(u).
    pub fn l(&self, u: f64) -> f64 {
        self.l_from_table(u)
    }

    /// L⁻¹(x); NaN outside the tabulated range.
    pub fn l_inv(&self, x: f64) -> f64 {
        let (lo, hi) = (self.l[0], self.l[LAMPERTI_CELLS]);
        if !(x >= lo - 1e-12 && x <= hi + 1e-12) {
            return f64::NAN;
        }
        let i = self.l.partition_point(|&v| v <= x).clamp(1, LAMPERTI_CELLS) - 1;
        let s = (x - self.l[i]) / (self.l[i + 1] - self.l[i]);
        let mut u = self.u[i] + s * (self.u[i + 1] - self.u[i]);
        for _ in 0..60 {
            let step = (self.l_from_table(u) - x) * self.sigma.value(u);
            u -= step;
            if step.abs() <= 1e-15 * (1.0 + u.abs()) {
                break;
            }
        }
        u
    }

    /// (ν/σ − ½σ′)(u).
    fn mu_of_u(&self, u: f64) -> f64 {
        self.nu.value(u) / self.sigma.value(u) - 0.5 * self.sigma.d1(u)
    }

    pub fn mu(&self, x: f64) -> f64 {
        self.mu_of_u(self.l_inv(x))
    }

    pub fn dmu(&self, x: f64) -> f64 {
        let u = self.l_inv(x);
        let (nu, s, s1) = (self.nu.value(u), self.sigma.value(u), self.sigma.d1(u));
        s * (self.nu.d1(u) / s - nu * s1 / (s * s) - 0.5 * self.sigma.d2(u))
    }

    /// G(y) = ∫₀^{L⁻¹(y)} (ν/σ − ½σ′)(u)/σ(u) du.
    pub fn big_g(&self, y: f64) -> Result<f64> {
        let u = self.l_inv(y);
        if !u.is_finite() {
            return Err(Error::Domain(format!("G({y}) outside the Lamperti table range")));
        }
        adaptive_simpson(&|v| self.mu_of_u(v) / self.sigma.value(v), 0.0, u, G_TOL)
    }
}

/// The scale map L and its inverse.
#[derive(Debug, Clone)]
pub enum ScaleMap {
    /// L(u) = u / scale.
    Linear { scale: f64 },
    Numeric(Arc<NumericLamperti>),
}

impl ScaleMap {
    pub fn l(&self, u: f64) -> f64 {
        match self {
            ScaleMap::Linear { scale } => u / scale,
            ScaleMap::Numeric(n) => n.l(u),
        }
    }

    pub fn l_inv(&self, x: f64) -> f64 {
        match self {
            ScaleMap::Linear { scale } => x * scale,
            ScaleMap::Numeric(n) => n.l_inv(x),
        }
    }

    fn sigma_parts(&self, u: f64) -> (f64, f64) {
        match self {
            ScaleMap::Linear { scale } => (*scale, 0.0),
            ScaleMap::Numeric(n) => (n.sigma.value(u), n.sigma.d1(u)),
        }
    }

    /// The curve t ↦ L(g(t)), tabulated on `n + 1` nodes with chain-rule derivatives.
    pub fn transform_curve(&self, g: &Curve, n: usize) -> Curve {
        let (a, b) = g.domain();
        let f = |t: f64| {
            let (u, u1, u2) = (g.value(t), g.d1(t), g.d2(t));
            let (s, s1) = self.sigma_parts(u);
            (self.l(u), u1 / s, u2 / s - u1 * u1 * s1 / (s * s))
        };
        Curve::Tabulated(TabulatedCurve::from_fn(a, b, n, f, 1e-3))
    }
}

/// Unit-diffusion drift plus the scale map.
#[derive(Debug, Clone)]
pub struct LampertiTransform {
    pub drift: DriftModel,
    pub map: ScaleMap,
}

/// Reduce dU = ν dt + σ dW to dX = μ(X)dt + dW with X = L(U).
pub fn lamperti_transform(m: &SdeModel) -> Result<LampertiTransform> {
    let [u_lo, u_hi] = m.range;
    if !(u_lo <= 0.0 && 0.0 <= u_hi && u_lo < u_hi) {
        return Err(Error::Model(format!("Lamperti range [{u_lo}, {u_hi}] must contain 0")));
    }
    if m.sigma.is_empty() || m.nu.is_empty() {
        return Err(Error::Model("ν and σ need at least one coefficient".into()));
    }
    let nu = StatePoly(m.nu.clone());
    let sigma = StatePoly(m.sigma.clone());
    let n = 4096;
    for i in 0..=n {
        let u = u_lo + (u_hi - u_lo) * i as f64 / n as f64;
        let s = sigma.value(u);
        if !(s > 0.0) {
            return Err(Error::Model(format!("σ({u}) = {s} is not positive")));
        }
    }
    if sigma.is_constant() {
        let s = sigma.0[0];
        let coeffs: Vec<f64> = nu.0.iter().enumerate().map(|(k, &c)| c * s.powi(k as i32) / s).collect();
        let drift = if coeffs.len() == 1 || coeffs.iter().skip(1).all(|&c| c == 0.0) {
            if coeffs[0] == 0.0 {
                DriftModel::Zero
            } else {
                DriftModel::Constant { c: coeffs[0] }
            }
        } else {
            DriftModel::Polynomial { coeffs }
        };
        return Ok(LampertiTransform { drift, map: ScaleMap::Linear { scale: s } });
    }
    let table = Arc::new(NumericLamperti::build(nu, sigma, u_lo, u_hi)?);
    Ok(LampertiTransform { drift: DriftModel::Lamperti(table.clone()), map: ScaleMap::Numeric(table) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::fill_bridge;
    use crate::rng::RngStream;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_4;

    fn unit_path(f: impl Fn(f64) -> f64, n: usize) -> SamplePath {
        SamplePath::from_fn(TimeGrid::unit(n), f).unwrap()
    }

    #[test]
    fn g_examples() {
        assert_eq!(eval_g(&DriftModel::Zero, 5.0).unwrap(), 0.0);
        assert_eq!(eval_g(&DriftModel::Constant { c: 2.0 }, 1.5).unwrap(), 3.0);
        assert_eq!(eval_g(&DriftModel::Linear { a: 0.0, b: -1.0 }, 2.0).unwrap(), -2.0);
        let p = DriftModel::Polynomial { coeffs: vec![1.0, 0.0, 3.0] };
        assert!((eval_g(&p, 2.0).unwrap() - (2.0 + 8.0)).abs() < 1e-14);
        for d in [DriftModel::Linear { a: 0.3, b: 2.0 }, p] {
            assert_eq!(eval_g(&d, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn tabulated_g_uses_quadrature() {
        let xs: Vec<f64> = (0..=200).map(|i| -2.0 + 4.0 * i as f64 / 200.0).collect();
        let t = TabulatedDrift {
            x_start: -2.0,
            x_end: 2.0,
            mu: xs.iter().map(|x| x.sin()).collect(),
            dmu: xs.iter().map(|x| x.cos()).collect(),
        };
        let d = DriftModel::Tabulated(t);
        let g = eval_g(&d, 1.3).unwrap();
        assert!((g - (1.0 - 1.3f64.cos())).abs() < 1e-7);
    }

    #[test]
    fn n_examples() {
        let w = unit_path(|t| (3.0 * t).sin(), 64);
        assert_eq!(eval_n(&DriftModel::Zero, &w), 0.0);
        assert!((eval_n(&DriftModel::Constant { c: 2.0 }, &w) - 4.0).abs() < 1e-12);
        let zero = unit_path(|_| 0.0, 64);
        assert!((eval_n(&DriftModel::Linear { a: 0.0, b: -1.0 }, &zero) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn n_is_additive_under_splice() {
        let d = DriftModel::Polynomial { coeffs: vec![0.2, -1.0, 0.5] };
        let w = unit_path(|t| (5.0 * t).cos(), 100);
        let (a, b) = (w.slice(0, 37).unwrap(), w.slice(37, 100).unwrap());
        assert!((eval_n(&d, &w) - eval_n(&d, &a) - eval_n(&d, &b)).abs() < 1e-12);
    }

    #[test]
    fn n_quadrature_is_second_order() {
        let d = DriftModel::Polynomial { coeffs: vec![0.0, -1.0, 0.3] };
        let f = |t: f64| (4.0 * t).sin() + t * t;
        let exact = eval_n(&d, &unit_path(f, 1 << 16));
        let errs: Vec<f64> = [16, 32, 64, 128].iter().map(|&n| (eval_n(&d, &unit_path(f, n)) - exact).abs()).collect();
        let order: f64 = errs.windows(2).map(|e| (e[0] / e[1]).log2()).sum::<f64>() / 3.0;
        assert!(order >= 1.9, "observed order {order}");
    }

    #[test]
    fn analytic_mu_prime_matches_finite_differences() {
        let h = 1e-6;
        for d in [
            DriftModel::Linear { a: 0.5, b: -2.0 },
            DriftModel::Polynomial { coeffs: vec![0.1, 0.2, -0.3, 0.05] },
            DriftModel::Constant { c: 1.0 },
        ] {
            for &x in &[-1.5, 0.0, 0.7, 2.2] {
                let fd = (d.mu(x + h) - d.mu(x - h)) / (2.0 * h);
                assert!((fd - d.dmu(x)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn c_mu_examples() {
        let k = Corridor::flat(0.0, 1.0).unwrap();
        assert_eq!(c_mu_bound(&DriftModel::Zero, &k, 0.5), 0.0);
        assert!((c_mu_bound(&DriftModel::Linear { a: 0.0, b: -1.0 }, &k, 0.5) - 1.0).abs() < 1e-12);
        assert_eq!(c_mu_bound(&DriftModel::Constant { c: 1.3 }, &k, 0.5), 0.0);
        // −φ = −(b + (a + b x)²) peaks off the scan grid.
        let d = DriftModel::Linear { a: 0.123_456_7, b: -1.0 };
        assert!((c_mu_bound(&d, &k, 0.5) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weight_bound_holds_for_corridor_paths() {
        let k = Corridor::flat(0.0, 1.0).unwrap();
        let d = DriftModel::Polynomial { coeffs: vec![0.3, -2.0, 0.0, 1.0] };
        let c = c_mu_bound(&d, &k, 0.5);
        let grid = TimeGrid::unit(128);
        let mut buf = vec![0.0; grid.len()];
        let mut checked = 0;
        for i in 0..20_000u64 {
            let mut rng = RngStream::new(3, i).rng();
            fill_bridge(&mut rng, &grid, 0.5, 0.5, &mut buf);
            if buf.iter().all(|&x| (-0.5..=1.5).contains(&x)) {
                let n = n_functional(&d, &buf, grid.dt());
                assert!((-0.5 * n).exp() <= (c * 1.0).exp() * (1.0 + 1e-12));
                checked += 1;
            }
        }
        assert!(checked >= 10_000);
    }

    #[test]
    fn cameron_martin_examples() {
        let w = unit_path(|t| (7.0 * t).sin(), 50);
        assert_eq!(cameron_martin_z(&Curve::constant(0.4), &w), 1.0);
        let zero = unit_path(|_| 0.0, 50);
        assert!((cameron_martin_z(&Curve::linear(0.0, 1.0), &zero) - (-0.5f64).exp()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn z_tilde_is_z_of_shifted_path(
            amp in -1.0f64..1.0, freq in 0.1f64..2.0, phase in -3.0f64..3.0,
            c2 in -2.0f64..2.0, seed in 0u64..1000,
        ) {
            let g = Curve::Polynomial { coeffs: vec![amp, phase * 0.1, c2, freq] };
            let grid = TimeGrid::unit(200);
            let mut v = vec![0.0; grid.len()];
            fill_bridge(&mut RngStream::new(seed, 1).rng(), &grid, 0.0, amp, &mut v);
            let w = SamplePath::new(grid, v).unwrap();
            let lhs = cameron_martin_z_tilde(&g, &w);
            let rhs = cameron_martin_z(&g, &w.shifted(&g, 1.0));
            prop_assert!((lhs / rhs - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn lamperti_constant_cases() {
        let t = lamperti_transform(&SdeModel { nu: vec![0.4, -1.0], sigma: vec![1.0], range: [-1.0, 1.0] }).unwrap();
        assert_eq!(t.drift, DriftModel::Polynomial { coeffs: vec![0.4, -1.0] });
        assert_eq!(t.map.l(0.3), 0.3);
        let t = lamperti_transform(&SdeModel { nu: vec![3.0], sigma: vec![2.0], range: [-1.0, 1.0] }).unwrap();
        assert_eq!(t.drift, DriftModel::Constant { c: 1.5 });
        assert_eq!(t.map.l(1.0), 0.5);
        assert!(lamperti_transform(&SdeModel { nu: vec![0.0], sigma: vec![0.5, -1.0], range: [0.0, 2.0] }).is_err());
    }

    #[test]
    fn lamperti_arctan_case() {
        let t = lamperti_transform(&SdeModel { nu: vec![0.0], sigma: vec![1.0, 0.0, 1.0], range: [0.0, 2.0] }).unwrap();
        assert!((t.map.l(1.0) - FRAC_PI_4).abs() < 1e-13);
        assert!((t.drift.mu(FRAC_PI_4) + 1.0).abs() < 1e-10);
        for i in 0..=100 {
            let y = 2.0 * i as f64 / 100.0;
            assert!((t.map.l(y) - y.atan()).abs() < 1e-12);
            assert!((t.map.l_inv(t.map.l(y)) - y).abs() < 1e-8);
        }
        // μ(x) = −tan x, μ′(x) = −sec² x, G(y) = ln cos y.
        let x = 0.6;
        assert!((t.drift.mu(x) + x.tan()).abs() < 1e-10);
        assert!((t.drift.dmu(x) + 1.0 / x.cos().powi(2)).abs() < 1e-9);
        assert!((t.drift.big_g(x).unwrap() - x.cos().ln()).abs() < 1e-9);
    }

    #[test]
    fn transformed_curve_has_chain_rule_derivatives() {
        let t = lamperti_transform(&SdeModel { nu: vec![0.0], sigma: vec![1.0, 0.0, 1.0], range: [-3.0, 3.0] }).unwrap();
        let g = Curve::linear(0.2, 1.0);
        let lg = t.map.transform_curve(&g, 512);
        lg.validate().unwrap();
        assert!((lg.value(0.5) - 0.7f64.atan()).abs() < 1e-9);
        assert!((lg.d1(0.5) - 1.0 / (1.0 + 0.49)).abs() < 1e-9);
    }
}
