//! Corridor geometry, time grids, sample paths and the path algebra.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

const DOMAIN_TOL: f64 = 1e-12;

/// A twice-differentiable time function with analytic (or tabulated) g, g′, g″.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Curve {
    Constant { value: f64 },
    /// g(t) = a + b·t
    Linear { a: f64, b: f64 },
    /// g(t) = Σ coeffs[k]·t^k
    Polynomial { coeffs: Vec<f64> },
    /// g(t) = offset + amplitude·cos(2π·frequency·t + phase)
    Cosine { amplitude: f64, frequency: f64, phase: f64, offset: f64 },
    Tabulated(TabulatedCurve),
    /// t ↦ base(pivot − t)
    Reversed { base: Box<Curve>, pivot: f64 },
    /// t ↦ scale·base(t) + shift
    Affine { base: Box<Curve>, scale: f64, shift: f64 },
}

/// g, g′, g″ sampled on a uniform grid over `[t_start, t_end]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulatedCurve {
    pub t_start: f64,
    pub t_end: f64,
    pub values: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    /// Allowed gap between `d1` and centered differences of `values`.
    pub tolerance: f64,
}

impl TabulatedCurve {
    /// Tabulate an arbitrary smooth function on `n + 1` nodes.
    pub fn from_fn(t_start: f64, t_end: f64, n: usize, f: impl Fn(f64) -> (f64, f64, f64), tolerance: f64) -> Self {
        let h = (t_end - t_start) / n as f64;
        let (mut values, mut d1, mut d2) = (Vec::with_capacity(n + 1), Vec::with_capacity(n + 1), Vec::with_capacity(n + 1));
        for i in 0..=n {
            let (g, g1, g2) = f(t_start + i as f64 * h);
            values.push(g);
            d1.push(g1);
            d2.push(g2);
        }
        Self { t_start, t_end, values, d1, d2, tolerance }
    }

    fn step(&self) -> f64 {
        (self.t_end - self.t_start) / (self.values.len() - 1) as f64
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let h = self.step();
        let n = self.values.len() - 1;
        let x = ((t - self.t_start) / h).clamp(0.0, n as f64);
        let i = (x.floor() as usize).min(n - 1);
        (i, x - i as f64)
    }

    fn validate(&self) -> Result<()> {
        let n = self.values.len();
        if n < 3 || self.d1.len() != n || self.d2.len() != n {
            return Err(Error::Domain("tabulated curve needs ≥ 3 nodes and equal-length g, g′, g″ tables".into()));
        }
        if !(self.t_start < self.t_end) {
            return Err(Error::Domain("tabulated curve needs t_start < t_end".into()));
        }
        if self.values.iter().chain(&self.d1).chain(&self.d2).any(|v| !v.is_finite()) {
            return Err(Error::Domain("tabulated curve has non-finite entries".into()));
        }
        let h = self.step();
        for i in 1..n - 1 {
            let fd = (self.values[i + 1] - self.values[i - 1]) / (2.0 * h);
            if (fd - self.d1[i]).abs() > self.tolerance {
                return Err(Error::Domain(format!(
                    "tabulated g′ inconsistent with finite differences at node {i}: {} vs {fd}",
                    self.d1[i]
                )));
            }
        }
        Ok(())
    }

    fn value(&self, t: f64) -> f64 {
        let (i, s) = self.locate(t);
        let h = self.step();
        let (y0, y1, m0, m1) = (self.values[i], self.values[i + 1], self.d1[i] * h, self.d1[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * m1
    }

    fn linear(&self, table: &[f64], t: f64) -> f64 {
        let (i, s) = self.locate(t);
        table[i] + s * (table[i + 1] - table[i])
    }
}

fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

fn poly_derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs.iter().enumerate().skip(1).map(|(k, &c)| k as f64 * c).collect()
}

impl Curve {
    pub fn constant(value: f64) -> Self {
        Curve::Constant { value }
    }

    pub fn linear(a: f64, b: f64) -> Self {
        Curve::Linear { a, b }
    }

    /// Time reversal about `pivot`: t ↦ g(pivot − t).
    pub fn reversed(&self, pivot: f64) -> Self {
        Curve::Reversed { base: Box::new(self.clone()), pivot }
    }

    pub fn affine(&self, scale: f64, shift: f64) -> Self {
        Curve::Affine { base: Box::new(self.clone()), scale, shift }
    }

    /// Closed time interval on which the curve is defined.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            Curve::Tabulated(tc) => (tc.t_start, tc.t_end),
            Curve::Reversed { base, pivot } => {
                let (a, b) = base.domain();
                (pivot - b, pivot - a)
            }
            Curve::Affine { base, .. } => base.domain(),
            _ => (0.0, 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Curve::Constant { value } if !value.is_finite() => Err(Error::Domain("non-finite constant curve".into())),
            Curve::Linear { a, b } if !(a.is_finite() && b.is_finite()) => {
                Err(Error::Domain("non-finite linear curve".into()))
            }
            Curve::Polynomial { coeffs } if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) => {
                Err(Error::Domain("polynomial curve needs finite coefficients".into()))
            }
            Curve::Cosine { amplitude, frequency, phase, offset }
                if ![amplitude, frequency, phase, offset].iter().all(|v| v.is_finite()) =>
            {
                Err(Error::Domain("non-finite cosine curve parameters".into()))
            }
            Curve::Tabulated(tc) => tc.validate(),
            Curve::Reversed { base, pivot } => {
                if !pivot.is_finite() {
                    return Err(Error::Domain("non-finite reversal pivot".into()));
                }
                base.validate()
            }
            Curve::Affine { base, scale, shift } => {
                if !(scale.is_finite() && shift.is_finite()) {
                    return Err(Error::Domain("non-finite affine curve parameters".into()));
                }
                base.validate()
            }
            _ => Ok(()),
        }
    }

    /// Checked evaluation of g (order 0), g′ (1) or g″ (2).
    pub fn eval(&self, t: f64, order: u8) -> Result<f64> {
        let (a, b) = self.domain();
        if !(t >= a - DOMAIN_TOL && t <= b + DOMAIN_TOL) {
            return Err(Error::Domain(format!("t = {t} outside curve domain [{a}, {b}]")));
        }
        let t = t.clamp(a, b);
        let v = match order {
            0 => self.value(t),
            1 => self.d1(t),
            2 => self.d2(t),
            _ => return Err(Error::Argument(format!("derivative order {order} not supported"))),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Domain(format!("curve not finite at t = {t}")))
        }
    }

    /// g(t), unchecked.
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Curve::Constant { value } => *value,
            Curve::Linear { a, b } => a + b * t,
            Curve::Polynomial { coeffs } => horner(coeffs, t),
            Curve::Cosine { amplitude, frequency, phase, offset } => {
                offset + amplitude * (2.0 * PI * frequency * t + phase).cos()
            }
            Curve::Tabulated(tc) => tc.value(t),
            Curve::Reversed { base, pivot } => base.value(pivot - t),
            Curve::Affine { base, scale, shift } => scale * base.value(t) + shift,
        }
    }

    /// g′(t), unchecked.
    pub fn d1(&self, t: f64) -> f64 {
        match self {
            Curve::Constant { .. } => 0.0,
            Curve::Linear { b, .. } => *b,
            Curve::Polynomial { coeffs } => horner(&poly_derivative(coeffs), t),
            Curve::Cosine { amplitude, frequency, phase, .. } => {
                let w = 2.0 * PI * frequency;
                -amplitude * w * (w * t + phase).sin()
            }
            Curve::Tabulated(tc) => tc.linear(&tc.d1, t),
            Curve::Reversed { base, pivot } => -base.d1(pivot - t),
            Curve::Affine { base, scale, .. } => scale * base.d1(t),
        }
    }

    /// g″(t), unchecked.
    pub fn d2(&self, t: f64) -> f64 {
        match self {
            Curve::Constant { .. } | Curve::Linear { .. } => 0.0,
            Curve::Polynomial { coeffs } => horner(&poly_derivative(&poly_derivative(coeffs)), t),
            Curve::Cosine { amplitude, frequency, phase, .. } => {
                let w = 2.0 * PI * frequency;
                -amplitude * w * w * (w * t + phase).cos()
            }
            Curve::Tabulated(tc) => tc.linear(&tc.d2, t),
            Curve::Reversed { base, pivot } => base.d2(pivot - t),
            Curve::Affine { base, scale, .. } => scale * base.d2(t),
        }
    }

    /// True when g is constant in time.
    pub fn is_flat(&self) -> bool {
        match self {
            Curve::Constant { .. } => true,
            Curve::Linear { b, .. } => *b == 0.0,
            Curve::Polynomial { coeffs } => coeffs.iter().skip(1).all(|&c| c == 0.0),
            Curve::Cosine { amplitude, frequency, .. } => *amplitude == 0.0 || *frequency == 0.0,
            Curve::Tabulated(tc) => tc.values.iter().all(|&v| v == tc.values[0]) && tc.d1.iter().all(|&v| v == 0.0),
            Curve::Reversed { base, .. } => base.is_flat(),
            Curve::Affine { base, scale, .. } => *scale == 0.0 || base.is_flat(),
        }
    }
}

/// Uniform time grid on `[t_start, t_end]` with `n_steps` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_start: f64,
    t_end: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t_start.is_finite() && t_end.is_finite() && t_start < t_end) {
            return Err(Error::Domain(format!("time grid needs t_start < t_end, got [{t_start}, {t_end}]")));
        }
        if n_steps == 0 {
            return Err(Error::Domain("time grid needs n_steps ≥ 1".into()));
        }
        Ok(Self { t_start, t_end, n_steps })
    }

    /// Unit interval with `n_steps` steps.
    pub fn unit(n_steps: usize) -> Self {
        Self::new(0.0, 1.0, n_steps).expect("n_steps ≥ 1")
    }

    /// Grid on `[t_start, t_end]` whose step is as close as possible to `dt`.
    pub fn with_step(t_start: f64, t_end: f64, dt: f64) -> Result<Self> {
        let n = ((t_end - t_start) / dt).round().max(1.0) as usize;
        Self::new(t_start, t_end, n)
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t_start) / self.n_steps as f64
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn time(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.t_end
        } else {
            self.t_start + i as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| self.time(i)).collect()
    }

    /// Index of the node at time `t`, if `t` is (numerically) a node.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = (t - self.t_start) / self.dt();
        let i = x.round();
        if i >= 0.0 && i <= self.n_steps as f64 && (x - i).abs() < 1e-7 {
            Some(i as usize)
        } else {
            None
        }
    }

    /// Index of the node closest to `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        ((t - self.t_start) / self.dt()).round().clamp(0.0, self.n_steps as f64) as usize
    }

    /// The grid traversed backwards is the same grid; reversal maps node i to n − i.
    pub fn reversed_index(&self, i: usize) -> usize {
        self.n_steps - i
    }

    /// Sub-grid between two node indices.
    pub fn slice(&self, from: usize, to: usize) -> Result<Self> {
        if from >= to || to > self.n_steps {
            return Err(Error::Domain(format!("invalid node range {from}..{to}")));
        }
        Self::new(self.time(from), self.time(to), to - from)
    }
}

/// A path on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl SamplePath {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Domain(format!("path has {} values for {} grid nodes", values.len(), grid.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric { step: i, message: "non-finite path value".into() });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.times().into_iter().map(f).collect())
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn start(&self) -> f64 {
        self.values[0]
    }

    pub fn end(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Linear interpolation between nodes.
    pub fn value_at(&self, t: f64) -> f64 {
        let x = ((t - self.grid.t_start) / self.grid.dt()).clamp(0.0, self.grid.n_steps as f64);
        let i = (x.floor() as usize).min(self.grid.n_steps - 1);
        let s = x - i as f64;
        self.values[i] + s * (self.values[i + 1] - self.values[i])
    }

    /// output(t) = input(t1 + t2 − t) on the same grid.
    pub fn reversed(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        Self { grid: self.grid, values }
    }

    /// w + scale·g pointwise.
    pub fn shifted(&self, g: &Curve, scale: f64) -> Self {
        let values = self.values.iter().enumerate().map(|(i, v)| v + scale * g.value(self.grid.time(i))).collect();
        Self { grid: self.grid, values }
    }

    /// Restriction to the nodes `from..=to`.
    pub fn slice(&self, from: usize, to: usize) -> Result<Self> {
        let grid = self.grid.slice(from, to)?;
        Ok(Self { grid, values: self.values[from..=to].to_vec() })
    }

    /// CSV with header `t,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", self.grid.time(i), v)?;
        }
        Ok(())
    }
}

/// Concatenate paths on adjacent intervals; at a junction the later part wins.
pub fn splice(parts: &[SamplePath]) -> Result<SamplePath> {
    let first = parts.first().ok_or_else(|| Error::Composition("splice of zero parts".into()))?;
    if parts.len() == 1 {
        return Ok(first.clone());
    }
    let dt = first.grid.dt();
    let mut values = Vec::with_capacity(parts.iter().map(|p| p.grid.n_steps).sum::<usize>() + 1);
    let mut n_steps = 0;
    for (k, part) in parts.iter().enumerate() {
        if k > 0 {
            let prev = &parts[k - 1].grid;
            let gap = part.grid.t_start - prev.t_end;
            if gap.abs() > 1e-12 * (1.0 + prev.t_end.abs()) {
                let what = if gap > 0.0 { "non-adjacent" } else { "overlapping" };
                return Err(Error::Composition(format!(
                    "{what} parts: [.., {}] then [{}, ..]",
                    prev.t_end, part.grid.t_start
                )));
            }
            if (part.grid.dt() - dt).abs() > 1e-9 * dt {
                return Err(Error::Composition(format!("step mismatch: {} vs {dt}", part.grid.dt())));
            }
            values.pop();
        }
        values.extend_from_slice(&part.values);
        n_steps += part.grid.n_steps;
    }
    let grid = TimeGrid::new(first.grid.t_start, parts[parts.len() - 1].grid.t_end, n_steps)?;
    SamplePath::new(grid, values)
}

/// Two curves g⁻ < g⁺ over a closed time interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Corridor {
    lower: Curve,
    upper: Curve,
    t_start: f64,
    t_end: f64,
    min_width: f64,
}

/// Lower and upper admissible levels at every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CorridorNodes {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl CorridorNodes {
    pub fn contains(&self, values: &[f64]) -> bool {
        values.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *v >= *l && *v <= *h)
    }
}

impl Corridor {
    pub fn new(lower: Curve, upper: Curve, t_start: f64, t_end: f64) -> Result<Self> {
        lower.validate()?;
        upper.validate()?;
        if !(t_start >= 0.0 && t_end <= 1.0 + DOMAIN_TOL && t_start < t_end) {
            return Err(Error::Domain(format!("corridor domain [{t_start}, {t_end}] must be a subinterval of [0, 1]")));
        }
        for (name, c) in [("lower", &lower), ("upper", &upper)] {
            let (a, b) = c.domain();
            if t_start < a - DOMAIN_TOL || t_end > b + DOMAIN_TOL {
                return Err(Error::Domain(format!("{name} curve domain [{a}, {b}] does not cover [{t_start}, {t_end}]")));
            }
        }
        let mut min_width = f64::INFINITY;
        let n = 4096;
        for i in 0..=n {
            let t = t_start + (t_end - t_start) * i as f64 / n as f64;
            let w = upper.value(t) - lower.value(t);
            if !w.is_finite() {
                return Err(Error::Domain(format!("corridor curves not finite at t = {t}")));
            }
            min_width = min_width.min(w);
        }
        if !(min_width > 0.0) {
            return Err(Error::Domain(format!(
                "corridor invariant violated: min (g⁺ − g⁻) = {min_width} must be > 0"
            )));
        }
        Ok(Self { lower, upper, t_start, t_end, min_width })
    }

    /// Flat corridor `[lo, hi]` on `[0, 1]`.
    pub fn flat(lo: f64, hi: f64) -> Result<Self> {
        Self::new(Curve::constant(lo), Curve::constant(hi), 0.0, 1.0)
    }

    pub fn lower(&self) -> &Curve {
        &self.lower
    }

    pub fn upper(&self) -> &Curve {
        &self.upper
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn min_width(&self) -> f64 {
        self.min_width
    }

    pub fn lo(&self, t: f64) -> f64 {
        self.lower.value(t)
    }

    pub fn hi(&self, t: f64) -> f64 {
        self.upper.value(t)
    }

    pub fn width(&self, t: f64) -> f64 {
        self.upper.value(t) - self.lower.value(t)
    }

    pub fn is_flat(&self) -> bool {
        self.lower.is_flat() && self.upper.is_flat()
    }

    /// Range [min g⁻, max g⁺] over the domain (dense scan).
    pub fn envelope(&self) -> (f64, f64) {
        let n = 4096;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..=n {
            let t = self.t_start + (self.t_end - self.t_start) * i as f64 / n as f64;
            lo = lo.min(self.lo(t));
            hi = hi.max(self.hi(t));
        }
        (lo, hi)
    }

    /// Checks the house-moving preconditions and returns b = g⁺(1).
    pub fn housemoving_endpoint(&self) -> Result<f64> {
        if self.t_start != 0.0 || (self.t_end - 1.0).abs() > DOMAIN_TOL {
            return Err(Error::Domain("house-moving corridor must live on [0, 1]".into()));
        }
        if self.lower.value(0.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("house-moving corridor needs g⁻(0) = 0, got {}", self.lower.value(0.0))));
        }
        Ok(self.upper.value(1.0))
    }

    /// The same corridor restricted to a subinterval.
    pub fn restricted(&self, t_start: f64, t_end: f64) -> Result<Self> {
        Self::new(self.lower.clone(), self.upper.clone(), t_start, t_end)
    }

    /// Corridor seen backwards from its upper end point: time u ↦ t1 + t2 − u and
    /// space y ↦ g⁺(t2) − y. A path starting on g⁺ at t2 becomes one starting on
    /// the new lower curve (which is 0 at t1).
    pub fn mirrored(&self) -> Self {
        let pivot = self.t_start + self.t_end;
        let top = self.upper.value(self.t_end);
        let lower = self.upper.reversed(pivot).affine(-1.0, top);
        let upper = self.lower.reversed(pivot).affine(-1.0, top);
        Self { lower, upper, t_start: self.t_start, t_end: self.t_end, min_width: self.min_width }
    }

    /// Node-wise membership with margins.
    pub fn contains(&self, w: &SamplePath, margin_lower: f64, margin_upper: f64) -> bool {
        let g = w.grid();
        w.values().iter().enumerate().all(|(i, &v)| {
            let t = g.time(i);
            v >= self.lo(t) - margin_lower && v <= self.hi(t) + margin_upper
        })
    }

    pub fn nodes(&self, grid: &TimeGrid, margin_lower: f64, margin_upper: f64) -> CorridorNodes {
        let times = grid.times();
        CorridorNodes {
            lo: times.iter().map(|&t| self.lo(t) - margin_lower).collect(),
            hi: times.iter().map(|&t| self.hi(t) + margin_upper).collect(),
        }
    }

    /// Fails when `grid` is not inside the corridor domain.
    pub fn check_grid(&self, grid: &TimeGrid) -> Result<()> {
        if grid.t_start() < self.t_start - DOMAIN_TOL || grid.t_end() > self.t_end + DOMAIN_TOL {
            return Err(Error::Domain(format!(
                "grid [{}, {}] outside corridor domain [{}, {}]",
                grid.t_start(),
                grid.t_end(),
                self.t_start,
                self.t_end
            )));
        }
        Ok(())
    }
}
