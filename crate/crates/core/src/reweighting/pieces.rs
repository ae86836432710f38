//! Per-node Monte Carlo statistics of the boundary-case pieces.
//!
//! Every piece sampler yields draws with a Brownian weight (inverse
//! Cameron–Martin factor times corridor survival) and a Girsanov factor. The
//! mean Brownian weight is the unconditional quantity entering q↑, q↓, p and
//! C; the SNIS mean of the Girsanov factor is the inner expectation
//! E[e^{−½N}] of the conditioned piece.

use super::Estimate;
use crate::conditioned::{
    map_draws, Draw, HouseMovingSampler, InteriorSampler, MeanderSampler, PathSampler, UpperWallSampler, WallBridgeSampler,
};
use crate::corridor::{Corridor, TimeGrid};
use crate::drift::DriftModel;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::stats::{ess, log_mean_exp};

/// Resolution and sample sizes for table estimation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableSettings {
    /// Grid steps per unit time.
    pub steps: usize,
    /// Paths per y-node or per scalar.
    pub paths: usize,
    /// Size of the kernel y-grid.
    pub nodes: usize,
    /// ESS floor for the Girsanov SNIS factors.
    pub min_ess: f64,
}

impl Default for TableSettings {
    fn default() -> Self {
        Self { steps: 512, paths: 10_000, nodes: 64, min_ess: 10.0 }
    }
}

impl TableSettings {
    pub fn grid(&self, a: f64, b: f64) -> Result<TimeGrid> {
        let n = (((b - a) * self.steps as f64).round() as usize).max(2);
        TimeGrid::new(a, b, n)
    }
}

/// Statistics of one piece ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PieceStats {
    /// Mean Brownian weight.
    pub base: Estimate,
    /// SNIS mean of the Girsanov factor under the Brownian weights.
    pub zeta: Estimate,
    pub ess: f64,
    pub paths: usize,
}

impl PieceStats {
    pub fn check_ess(&self, component: &str, floor: f64) -> Result<()> {
        if self.zeta.std_err > 0.0 && self.ess < floor {
            return Err(Error::degeneracy(component, format!("ESS {:.1} below floor {floor}", self.ess)));
        }
        Ok(())
    }
}

/// Run `n` draws of `s` and summarize them.
pub fn piece_stats<S: PathSampler + ?Sized>(s: &S, stream: RngStream, n: usize, component: &str) -> Result<PieceStats> {
    let draws: Vec<Draw> = map_draws(s, stream, n, |_, d| d);
    summarize(&draws, component)
}

fn summarize(draws: &[Draw], component: &str) -> Result<PieceStats> {
    let lb: Vec<f64> = draws.iter().map(|d| d.log_base).collect();
    let (lm, rel) = log_mean_exp(&lb);
    if lm == f64::NEG_INFINITY {
        return Err(Error::starvation(component, format!("no surviving paths out of {}", draws.len())));
    }
    let base = Estimate::new(lm.exp(), lm.exp() * rel);
    let e = ess(&lb);
    let g: Vec<f64> = draws.iter().filter(|d| d.log_base > f64::NEG_INFINITY).map(|d| d.log_girsanov).collect();
    let zeta = if g.iter().all(|&v| v == g[0]) {
        Estimate::exact(g[0].exp())
    } else {
        let vals: Vec<f64> = draws.iter().map(|d| if d.log_base > f64::NEG_INFINITY { d.log_girsanov.exp() } else { 0.0 }).collect();
        let s = super::snis_values(&lb, &vals)?;
        Estimate::new(s.estimate, s.std_err)
    };
    Ok(PieceStats { base, zeta, ess: e, paths: draws.len() })
}

/// Piece statistics on a y-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PieceTable {
    pub y: Vec<f64>,
    pub stats: Vec<PieceStats>,
}

impl PieceTable {
    fn build(ys: &[f64], stream: RngStream, f: impl Fn(usize, f64, RngStream) -> Result<PieceStats>) -> Result<Self> {
        let stats = ys.iter().enumerate().map(|(j, &y)| f(j, y, stream.substream(j as u64))).collect::<Result<Vec<_>>>()?;
        Ok(Self { y: ys.to_vec(), stats })
    }

    pub fn check_ess(&self, component: &str, floor: f64) -> Result<()> {
        for (y, s) in self.y.iter().zip(&self.stats) {
            s.check_ess(&format!("{component} at y = {y:.4}"), floor)?;
        }
        Ok(())
    }
}

/// Case (ii) pieces on [t_start, t]: from g⁻(t_start) to each y.
pub fn lower_pieces(k: &Corridor, drift: &DriftModel, t: f64, ys: &[f64], set: &TableSettings, stream: RngStream) -> Result<PieceTable> {
    let grid = set.grid(k.t_start(), t)?;
    PieceTable::build(ys, stream, |_, y, s| {
        let sampler = WallBridgeSampler::new(k, grid, y, drift.clone())?;
        piece_stats(&sampler, s, set.paths, "lower piece")
    })
}

/// Case (iii) pieces on [t, t_end]: from each y to g⁺(t_end).
pub fn upper_pieces(k: &Corridor, drift: &DriftModel, t: f64, ys: &[f64], set: &TableSettings, stream: RngStream) -> Result<PieceTable> {
    let grid = set.grid(t, k.t_end())?;
    PieceTable::build(ys, stream, |_, y, s| {
        let sampler = UpperWallSampler::new(k, grid, y, drift.clone())?;
        piece_stats(&sampler, s, set.paths, "upper piece")
    })
}

/// Case (i) bridges on [t1, t2] from y1 to each y.
pub fn bridge_pieces(
    k: &Corridor,
    drift: &DriftModel,
    (t1, y1): (f64, f64),
    t2: f64,
    ys: &[f64],
    set: &TableSettings,
    stream: RngStream,
) -> Result<PieceTable> {
    let grid = set.grid(t1, t2)?;
    PieceTable::build(ys, stream, |_, y, s| {
        let sampler = InteriorSampler::new(k, grid, y1, Some(y), drift.clone())?;
        piece_stats(&sampler, s, set.paths, "interior bridge")
    })
}

/// Case (vi) paths on [t, t_end] from each y with free end.
pub fn free_pieces(k: &Corridor, drift: &DriftModel, t: f64, t_end: f64, ys: &[f64], set: &TableSettings, stream: RngStream) -> Result<PieceTable> {
    let grid = set.grid(t, t_end)?;
    PieceTable::build(ys, stream, |_, y, s| {
        let sampler = InteriorSampler::new(k, grid, y, None, drift.clone())?;
        piece_stats(&sampler, s, set.paths, "free piece")
    })
}

/// Corridor meander from g⁻(t_start) on [t_start, t_end]: base = the meander
/// constant E[Z̃⁻¹(W⁺|K⁻)]·P(W⁺ ∈ K⁻), zeta = E[e^{G(end) − ½N}].
pub fn meander_stats(k: &Corridor, drift: &DriftModel, t_end: f64, set: &TableSettings, stream: RngStream) -> Result<PieceStats> {
    let sampler = MeanderSampler::new(k, set.grid(k.t_start(), t_end)?, drift.clone())?;
    piece_stats(&sampler, stream, set.paths, "meander")
}

/// House-moving at ε = 0: returns (C, E[e^{−½N(H)}], ESS).
pub fn housemoving_stats(k: &Corridor, drift: &DriftModel, set: &TableSettings, stream: RngStream) -> Result<PieceStats> {
    let grid = set.grid(0.0, 1.0)?;
    let split = grid.time(grid.n_steps() / 2);
    let sampler = HouseMovingSampler::new(k, grid, split, drift.clone())?;
    let mut s = piece_stats(&sampler, stream, set.paths, "house-moving")?;
    s.base = s.base.scale(1.0 / sampler.normalization_scale());
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_drift_gives_exact_unit_zeta() {
        let k = Corridor::flat(0.0, 1.0).unwrap();
        let set = TableSettings { steps: 128, paths: 200, ..Default::default() };
        let t = lower_pieces(&k, &DriftModel::Zero, 0.5, &[0.3, 0.6], &set, RngStream::root(1)).unwrap();
        assert!(t.stats.iter().all(|s| s.zeta == Estimate::exact(1.0)));
    }

    #[test]
    fn constant_drift_zeta_is_deterministic() {
        let k = Corridor::flat(0.0, 1.0).unwrap();
        let set = TableSettings { steps: 128, paths: 200, ..Default::default() };
        let t = upper_pieces(&k, &DriftModel::Constant { c: 1.5 }, 0.25, &[0.5], &set, RngStream::root(1)).unwrap();
        assert!((t.stats[0].zeta.value - (-0.5 * 2.25 * 0.75f64).exp()).abs() < 1e-12);
        assert_eq!(t.stats[0].zeta.std_err, 0.0);
    }

    #[test]
    fn upper_pieces_match_mirrored_lower_pieces() {
        // Flat corridor: the upper piece to b from y is the mirror of a lower
        // piece from 0 to b − y, so the Brownian weights agree statistically.
        let k = Corridor::flat(0.0, 1.0).unwrap();
        let set = TableSettings { steps: 256, paths: 20_000, ..Default::default() };
        let up = upper_pieces(&k, &DriftModel::Zero, 0.5, &[0.3], &set, RngStream::root(2)).unwrap().stats[0].base;
        let lo = lower_pieces(&k, &DriftModel::Zero, 0.5, &[0.7], &set, RngStream::root(3)).unwrap().stats[0].base;
        let se = (up.std_err.powi(2) + lo.std_err.powi(2)).sqrt();
        assert!((up.value - lo.value).abs() < 4.0 * se, "{up:?} vs {lo:?}");
    }
}
