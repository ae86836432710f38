//! Weighted samplers for the ε ↓ 0 limits themselves.
//!
//! A path started on the lower wall converges to a shifted BES(3) bridge
//! (pinned end) or meander (free end), reweighted by the inverse
//! Cameron–Martin factor of g⁻ and killed on leaving the corridor. Gluing a
//! lower piece on [0, τ] to a mirrored upper piece on [τ, 1] at a point y
//! drawn from a proposal r gives an importance sampler for house-moving whose
//! mean weight is C·√(τ(1−τ)).

use super::crossing::{log_path_survival, log_survival_below};
use super::ensemble::{Record, WeightedEnsemble};
use crate::corridor::{Corridor, CorridorNodes, TimeGrid};
use crate::drift::{n_functional, CameronMartin, DriftModel};
use crate::error::{Error, Result};
use crate::exact::{fill_bes3_bridge, fill_brownian, fill_bridge, fill_meander};
use crate::pwl::PiecewiseLinearDensity;
use crate::rng::{PathRng, RngStream};
use crate::special::open_uniform;
use rayon::prelude::*;

/// Log-weight of one draw, split into its Brownian part and the Girsanov part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Draw {
    /// Weight of the Brownian (μ ≡ 0) target.
    pub log_base: f64,
    /// Girsanov factor: −½N, plus G(end) for free ends.
    pub log_girsanov: f64,
}

impl Draw {
    pub fn log_weight(&self) -> f64 {
        self.log_base + self.log_girsanov
    }
}

/// Anything that draws one weighted path per stream.
pub trait PathSampler: Sync {
    fn grid(&self) -> &TimeGrid;
    fn draw(&self, stream: RngStream, out: &mut [f64]) -> Draw;
}

/// Apply `f` to paths `0..n`, in parallel, deterministically.
pub fn map_draws<S, T, F>(s: &S, stream: RngStream, n: usize, f: F) -> Vec<T>
where
    S: PathSampler + ?Sized,
    T: Send,
    F: Fn(&[f64], Draw) -> T + Sync,
{
    let len = s.grid().len();
    (0..n as u64)
        .into_par_iter()
        .map_init(
            || vec![0.0; len],
            |buf, i| {
                let d = s.draw(stream.substream(i), buf);
                f(buf, d)
            },
        )
        .collect()
}

/// Weighted ensemble of `n` draws with total log-weights.
pub fn weighted_ensemble<S: PathSampler + ?Sized>(s: &S, stream: RngStream, n: usize, record: &Record) -> Result<WeightedEnsemble> {
    let nodes = record.node_list(s.grid());
    let rows = map_draws(s, stream, n, |p, d| (nodes.iter().map(|&j| p[j]).collect::<Vec<f64>>(), d.log_weight()));
    WeightedEnsemble::from_rows(*s.grid(), nodes, rows)
}

fn girsanov(drift: &DriftModel, path: &[f64], dt: f64, free_end: bool) -> f64 {
    if drift.is_zero() {
        return 0.0;
    }
    let mut l = -0.5 * n_functional(drift, path, dt);
    if free_end {
        l += drift.big_g(path[path.len() - 1]).unwrap_or(f64::NEG_INFINITY);
    }
    l
}

/// A piece started on g⁻ at the left end of its interval.
#[derive(Debug, Clone)]
pub struct WallPiece {
    grid: TimeGrid,
    lower: Vec<f64>,
    width: Vec<f64>,
    cm: CameronMartin,
}

impl WallPiece {
    pub fn new(k: &Corridor, grid: TimeGrid) -> Result<Self> {
        k.check_grid(&grid)?;
        let times = grid.times();
        Ok(Self {
            lower: times.iter().map(|&t| k.lo(t)).collect(),
            width: times.iter().map(|&t| k.width(t)).collect(),
            cm: CameronMartin::new(k.lower(), &grid),
            grid,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Distance of the right end from g⁻ must lie in (0, width).
    pub fn end_width(&self) -> f64 {
        self.width[self.width.len() - 1]
    }

    fn finish(&self, out: &mut [f64]) -> f64 {
        let lw = -self.cm.log_z_tilde(out) + log_survival_below(out, &self.width, self.grid.dt());
        out.iter_mut().zip(&self.lower).for_each(|(v, g)| *v += g);
        lw
    }

    /// R + g⁻ with R a BES(3) bridge from 0 to `dist`; returns ln(Z̃⁻¹·S).
    pub fn sample_pinned(&self, rng: &mut PathRng, dist: f64, out: &mut [f64]) -> f64 {
        fill_bes3_bridge(rng, &self.grid, 0.0, dist, out);
        self.finish(out)
    }

    /// R + g⁻ with R a Brownian meander; returns ln(Z̃⁻¹·S).
    pub fn sample_free(&self, rng: &mut PathRng, out: &mut [f64]) -> f64 {
        fill_meander(rng, &self.grid, out);
        self.finish(out)
    }
}

/// Importance sampler for (diffusion) house-moving at ε = 0.
#[derive(Debug, Clone)]
pub struct HouseMovingSampler {
    grid: TimeGrid,
    split: usize,
    tau: f64,
    lo_tau: f64,
    hi_tau: f64,
    b: f64,
    lower: WallPiece,
    upper: WallPiece,
    proposal: PiecewiseLinearDensity,
    drift: DriftModel,
}

impl HouseMovingSampler {
    /// `grid` must be a grid on [0, 1] with `split_time` as an interior node.
    pub fn new(k: &Corridor, grid: TimeGrid, split_time: f64, drift: DriftModel) -> Result<Self> {
        let b = k.housemoving_endpoint()?;
        if grid.t_start() != 0.0 || grid.t_end() != 1.0 {
            return Err(Error::Domain("house-moving grid must span [0, 1]".into()));
        }
        let split = grid
            .index_of(split_time)
            .filter(|&s| s > 0 && s < grid.n_steps())
            .ok_or_else(|| Error::Domain(format!("split time {split_time} must be an interior grid node")))?;
        let tau = grid.time(split);
        let n = grid.n_steps();
        let lower = WallPiece::new(k, TimeGrid::new(0.0, tau, split)?)?;
        let upper = WallPiece::new(&k.mirrored(), TimeGrid::new(0.0, 1.0 - tau, n - split)?)?;
        let (lo_tau, hi_tau) = (k.lo(tau), k.hi(tau));
        let m = 4096;
        let ys: Vec<f64> = (0..=m).map(|i| lo_tau + (hi_tau - lo_tau) * i as f64 / m as f64).collect();
        let f: Vec<f64> = ys.iter().map(|&y| rho_pair(y, lo_tau, hi_tau, tau).exp()).collect();
        let proposal = PiecewiseLinearDensity::new(ys, f)?;
        Ok(Self { grid, split, tau, lo_tau, hi_tau, b, lower, upper, proposal, drift })
    }

    pub fn split_time(&self) -> f64 {
        self.tau
    }

    pub fn drift(&self) -> &DriftModel {
        &self.drift
    }

    /// The Brownian weights have mean C·√(τ(1−τ)).
    pub fn normalization_scale(&self) -> f64 {
        (self.tau * (1.0 - self.tau)).sqrt()
    }
}

/// ln ρ↑(y) + ln ρ↓(y): the meander end-point densities seen from both walls.
pub fn rho_pair(y: f64, lo: f64, hi: f64, t: f64) -> f64 {
    let (u, d) = (y - lo, hi - y);
    if u <= 0.0 || d <= 0.0 {
        return f64::NEG_INFINITY;
    }
    (u / t).ln() - u * u / (2.0 * t) + (d / (1.0 - t)).ln() - d * d / (2.0 * (1.0 - t))
}

impl PathSampler for HouseMovingSampler {
    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn draw(&self, stream: RngStream, out: &mut [f64]) -> Draw {
        let mut rng = stream.rng();
        let y = self.proposal.quantile(open_uniform(&mut rng));
        let s = self.split;
        let n = self.grid.n_steps();
        let r = self.proposal.pdf(y);
        let mut lw = rho_pair(y, self.lo_tau, self.hi_tau, self.tau) - r.ln();
        if !lw.is_finite() {
            out.iter_mut().for_each(|v| *v = self.lo_tau);
            return Draw { log_base: f64::NEG_INFINITY, log_girsanov: 0.0 };
        }
        lw += self.lower.sample_pinned(&mut rng, y - self.lo_tau, &mut out[..=s]);
        let mut mirror = vec![0.0; n - s + 1];
        lw += self.upper.sample_pinned(&mut rng, self.hi_tau - y, &mut mirror);
        for (j, v) in mirror.iter().enumerate() {
            out[n - j] = self.b - v;
        }
        out[s] = y;
        out[n] = self.b;
        Draw { log_base: lw, log_girsanov: girsanov(&self.drift, out, self.grid.dt(), false) }
    }
}

/// Corridor meander from g⁻(t_start) with free right end (case vii at ε = 0).
#[derive(Debug, Clone)]
pub struct MeanderSampler {
    piece: WallPiece,
    drift: DriftModel,
}

impl MeanderSampler {
    pub fn new(k: &Corridor, grid: TimeGrid, drift: DriftModel) -> Result<Self> {
        Ok(Self { piece: WallPiece::new(k, grid)?, drift })
    }
}

impl PathSampler for MeanderSampler {
    fn grid(&self) -> &TimeGrid {
        self.piece.grid()
    }

    fn draw(&self, stream: RngStream, out: &mut [f64]) -> Draw {
        let mut rng = stream.rng();
        let lw = self.piece.sample_free(&mut rng, out);
        Draw { log_base: lw, log_girsanov: girsanov(&self.drift, out, self.piece.grid().dt(), true) }
    }
}

/// Lower-wall start with pinned interior end (case ii at ε = 0).
#[derive(Debug, Clone)]
pub struct WallBridgeSampler {
    piece: WallPiece,
    dist: f64,
    drift: DriftModel,
}

impl WallBridgeSampler {
    /// Path from g⁻(t_start) to `end` (strictly inside at t_end).
    pub fn new(k: &Corridor, grid: TimeGrid, end: f64, drift: DriftModel) -> Result<Self> {
        let dist = end - k.lo(grid.t_end());
        if !(dist > 0.0 && dist < k.width(grid.t_end())) {
            return Err(Error::Domain(format!("end point {end} not strictly inside the corridor")));
        }
        Ok(Self { piece: WallPiece::new(k, grid)?, dist, drift })
    }
}

impl PathSampler for WallBridgeSampler {
    fn grid(&self) -> &TimeGrid {
        self.piece.grid()
    }

    fn draw(&self, stream: RngStream, out: &mut [f64]) -> Draw {
        let mut rng = stream.rng();
        let lw = self.piece.sample_pinned(&mut rng, self.dist, out);
        Draw { log_base: lw, log_girsanov: girsanov(&self.drift, out, self.piece.grid().dt(), false) }
    }
}

/// Interior start with the path ending on g⁺ (case iii at ε = 0), sampled
/// through the mirrored corridor and reported in original orientation.
#[derive(Debug, Clone)]
pub struct UpperWallSampler {
    grid: TimeGrid,
    piece: WallPiece,
    dist: f64,
    top: f64,
    drift: DriftModel,
}

impl UpperWallSampler {
    /// Path on `grid` from `start` (strictly inside) to g⁺(grid end).
    pub fn new(k: &Corridor, grid: TimeGrid, start: f64, drift: DriftModel) -> Result<Self> {
        k.check_grid(&grid)?;
        let t = grid.t_start();
        let dist = k.hi(t) - start;
        if !(dist > 0.0 && dist < k.width(t)) {
            return Err(Error::Domain(format!("start point {start} not strictly inside the corridor")));
        }
        let pivot = k.t_start() + k.t_end();
        let mgrid = TimeGrid::new(pivot - grid.t_end(), pivot - t, grid.n_steps())?;
        Ok(Self { grid, piece: WallPiece::new(&k.mirrored(), mgrid)?, dist, top: k.hi(k.t_end()), drift })
    }
}

impl PathSampler for UpperWallSampler {
    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn draw(&self, stream: RngStream, out: &mut [f64]) -> Draw {
        let mut rng = stream.rng();
        let mut m = vec![0.0; out.len()];
        let lw = self.piece.sample_pinned(&mut rng, self.dist, &mut m);
        let n = out.len() - 1;
        for (j, v) in out.iter_mut().enumerate() {
            *v = self.top - m[n - j];
        }
        Draw { log_base: lw, log_girsanov: girsanov(&self.drift, out, self.grid.dt(), false) }
    }
}

/// Interior start, pinned interior or free end, weighted by the corridor
/// survival probability (cases i and vi).
#[derive(Debug, Clone)]
pub struct InteriorSampler {
    grid: TimeGrid,
    start: f64,
    end: Option<f64>,
    nodes: CorridorNodes,
    drift: DriftModel,
}

impl InteriorSampler {
    pub fn new(k: &Corridor, grid: TimeGrid, start: f64, end: Option<f64>, drift: DriftModel) -> Result<Self> {
        k.check_grid(&grid)?;
        let nodes = k.nodes(&grid, 0.0, 0.0);
        if !(start > nodes.lo[0] && start < nodes.hi[0]) {
            return Err(Error::Domain(format!("start {start} not strictly inside the corridor")));
        }
        if let Some(b) = end {
            let n = grid.n_steps();
            if !(b > nodes.lo[n] && b < nodes.hi[n]) {
                return Err(Error::Domain(format!("end {b} not strictly inside the corridor")));
            }
        }
        Ok(Self { grid, start, end, nodes, drift })
    }
}

impl PathSampler for InteriorSampler {
    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn draw(&self, stream: RngStream, out: &mut [f64]) -> Draw {
        let mut rng = stream.rng();
        match self.end {
            Some(b) => fill_bridge(&mut rng, &self.grid, self.start, b, out),
            None => fill_brownian(&mut rng, &self.grid, self.start, out),
        }
        let ls = log_path_survival(out, &self.nodes, self.grid.dt(), true);
        let lg = if ls.is_finite() { girsanov(&self.drift, out, self.grid.dt(), self.end.is_none()) } else { 0.0 };
        Draw { log_base: ls, log_girsanov: lg }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{log_mean_exp, mean_se};

    #[test]
    fn housemoving_paths_are_pinned_and_inside() {
        let k = Corridor::flat(0.0, 1.0).unwrap();
        let s = HouseMovingSampler::new(&k, TimeGrid::unit(256), 0.5, DriftModel::Zero).unwrap();
        let e = weighted_ensemble(&s, RngStream::root(1), 200, &Record::Full).unwrap();
        for i in 0..e.len() {
            let p = e.path(i).unwrap();
            assert_eq!((p.start(), p.end()), (0.0, 1.0));
            if e.log_weights()[i].is_finite() {
                assert!(k.contains(&p, 0.0, 0.0));
            }
        }
        assert!(e.ess() > 50.0);
    }

    #[test]
    fn normalization_route_matches_image_series_constant() {
        // Flat corridor [0, 1]: C = 2π Σ_k ((2k+1)² − 1) n₁(2k+1) ≈ 0.222993.
        let c_exact: f64 = (0..20)
            .map(|k| {
                let m = (2 * k + 1) as f64;
                std::f64::consts::TAU * (m * m - 1.0) * (-0.5 * m * m).exp() / (2.0 * std::f64::consts::PI).sqrt()
            })
            .sum();
        assert!((c_exact - 0.222_993).abs() < 1e-6);
        let k = Corridor::flat(0.0, 1.0).unwrap();
        let s = HouseMovingSampler::new(&k, TimeGrid::unit(512), 0.5, DriftModel::Zero).unwrap();
        let lw = map_draws(&s, RngStream::root(7), 20_000, |_, d| d.log_base);
        let (lm, rel) = log_mean_exp(&lw);
        let c = lm.exp() / s.normalization_scale();
        assert!((c - c_exact).abs() < 4.0 * rel * c + 2e-3, "C = {c} ± {}", rel * c);
    }

    #[test]
    fn meander_endpoint_mean() {
        let k = Corridor::flat(0.0, 1e6).unwrap();
        let s = MeanderSampler::new(&k, TimeGrid::unit(64), DriftModel::Zero).unwrap();
        let ends = map_draws(&s, RngStream::root(3), 40_000, |p, d| {
            assert_eq!(d.log_weight(), 0.0);
            p[p.len() - 1]
        });
        let (m, se) = mean_se(&ends);
        assert!((m - (std::f64::consts::PI / 2.0).sqrt()).abs() < 3.0 * se);
    }
}
