//! Rejection sampling of corridor-conditioned paths.
//!
//! Attempt `j` of path `i` draws its increments from `stream.substream(i).child(j)`
//! and its acceptance uniform from a separate child, so node-only and
//! crossing-corrected runs see identical proposals (paired comparison).
//! Proposals are generated step by step and abandoned as soon as the
//! attempt is known to fail.

use super::crossing::log_step_survival;
use super::ensemble::{Record, WeightedEnsemble};
use crate::corridor::{Corridor, CorridorNodes, SamplePath, TimeGrid};
use crate::drift::DriftModel;
use crate::error::{Error, Result};
use crate::exact::bridge_step;
use crate::rng::{PathRng, RngStream};
use crate::special::{open_uniform, standard_normal};
use rayon::prelude::*;

const ACCEPT_TAG: u64 = 0x4143_4350;

/// Unconditioned proposal process.
#[derive(Debug, Clone, PartialEq)]
pub enum Proposal {
    /// Brownian bridge from `a` to `b`.
    Bridge { a: f64, b: f64 },
    /// Brownian motion from `a`.
    Brownian { a: f64 },
    /// Euler–Maruyama diffusion from `a`.
    Diffusion { drift: DriftModel, a: f64 },
}

impl Proposal {
    fn start(&self) -> f64 {
        match self {
            Proposal::Bridge { a, .. } | Proposal::Brownian { a } | Proposal::Diffusion { a, .. } => *a,
        }
    }

    #[inline]
    fn step(&self, rng: &mut PathRng, x: f64, rem: usize, dt: f64) -> f64 {
        match self {
            Proposal::Bridge { b, .. } => bridge_step(rng, x, *b, rem, dt),
            Proposal::Brownian { .. } => x + dt.sqrt() * standard_normal(rng),
            Proposal::Diffusion { drift, .. } => x + drift.mu(x) * dt + dt.sqrt() * standard_normal(rng),
        }
    }
}

/// Attempt and acceptance counts.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RejectionStats {
    pub attempts: u64,
    pub accepted: u64,
}

impl RejectionStats {
    pub fn rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.accepted as f64 / self.attempts as f64
        }
    }

    fn merge(self, o: Self) -> Self {
        Self { attempts: self.attempts + o.attempts, accepted: self.accepted + o.accepted }
    }
}

/// A fully specified rejection problem.
#[derive(Debug, Clone)]
pub struct RejectionSampler {
    grid: TimeGrid,
    proposal: Proposal,
    nodes: CorridorNodes,
    crossing_corrected: bool,
    max_attempts: u64,
}

impl RejectionSampler {
    pub fn new(
        grid: TimeGrid,
        proposal: Proposal,
        k: &Corridor,
        margins: (f64, f64),
        crossing_corrected: bool,
        max_attempts: u64,
    ) -> Result<Self> {
        k.check_grid(&grid)?;
        if !(margins.0 >= 0.0 && margins.1 >= 0.0) {
            return Err(Error::Argument("margins must be non-negative".into()));
        }
        let nodes = k.nodes(&grid, margins.0, margins.1);
        let a = proposal.start();
        if !(a >= nodes.lo[0] && a <= nodes.hi[0]) {
            return Err(Error::Domain(format!("proposal start {a} outside the widened corridor")));
        }
        if let Proposal::Bridge { b, .. } = proposal {
            let n = grid.n_steps();
            if !(b >= nodes.lo[n] && b <= nodes.hi[n]) {
                return Err(Error::Domain(format!("proposal end {b} outside the widened corridor")));
            }
        }
        Ok(Self { grid, proposal, nodes, crossing_corrected, max_attempts: max_attempts.max(1) })
    }

    /// One attempt; on success `out` holds the path.
    fn attempt(&self, stream: RngStream, out: &mut [f64]) -> bool {
        let mut rng = stream.rng();
        let threshold = if self.crossing_corrected { open_uniform(&mut stream.child(ACCEPT_TAG).rng()).ln() } else { 0.0 };
        let n = self.grid.n_steps();
        let dt = self.grid.dt();
        let (lo, hi) = (&self.nodes.lo, &self.nodes.hi);
        let mut log_s = 0.0;
        out[0] = self.proposal.start();
        for i in 0..n {
            let x = out[i];
            let y = self.proposal.step(&mut rng, x, n - i, dt);
            if !(y >= lo[i + 1] && y <= hi[i + 1]) {
                return false;
            }
            out[i + 1] = y;
            if self.crossing_corrected {
                log_s += log_step_survival(x, y, lo[i], lo[i + 1], hi[i], hi[i + 1], dt);
                if log_s < threshold {
                    return false;
                }
            }
        }
        true
    }

    /// Draw path `index` of `stream` into `out`.
    pub fn sample_into(&self, stream: RngStream, index: u64, out: &mut [f64]) -> std::result::Result<RejectionStats, RejectionStats> {
        let base = stream.substream(index);
        for j in 0..self.max_attempts {
            if self.attempt(base.child(j), out) {
                return Ok(RejectionStats { attempts: j + 1, accepted: 1 });
            }
        }
        Err(RejectionStats { attempts: self.max_attempts, accepted: 0 })
    }

    pub fn sample(&self, stream: RngStream) -> Result<(SamplePath, RejectionStats)> {
        let mut out = vec![0.0; self.grid.len()];
        match self.sample_into(stream, 0, &mut out) {
            Ok(st) => Ok((SamplePath::new(self.grid, out)?, st)),
            Err(st) => Err(Error::RejectionBudget { attempts: st.attempts, rate: st.rate() }),
        }
    }

    /// `n` accepted paths (unit weights), generated in parallel.
    pub fn ensemble(&self, stream: RngStream, n: usize, record: &Record) -> Result<(WeightedEnsemble, RejectionStats)> {
        let nodes = record.node_list(&self.grid);
        let results: Vec<std::result::Result<(Vec<f64>, RejectionStats), RejectionStats>> = (0..n as u64)
            .into_par_iter()
            .map_init(
                || vec![0.0; self.grid.len()],
                |buf, i| self.sample_into(stream, i, buf).map(|st| (nodes.iter().map(|&j| buf[j]).collect(), st)),
            )
            .collect();
        let mut total = RejectionStats::default();
        let mut rows = Vec::with_capacity(n);
        let mut failed = false;
        for r in results {
            match r {
                Ok((row, st)) => {
                    total = total.merge(st);
                    rows.push((row, 0.0));
                }
                Err(st) => {
                    total = total.merge(st);
                    failed = true;
                }
            }
        }
        if failed {
            return Err(Error::RejectionBudget { attempts: total.attempts, rate: total.rate() });
        }
        Ok((WeightedEnsemble::from_rows(self.grid, nodes, rows)?, total))
    }

    /// Acceptance indicator of every attempt for paths `0..n` with a single
    /// attempt each; used to estimate acceptance probabilities.
    pub fn acceptance_trials(&self, stream: RngStream, n: usize) -> Vec<bool> {
        (0..n as u64)
            .into_par_iter()
            .map_init(|| vec![0.0; self.grid.len()], |buf, i| self.attempt(stream.substream(i).child(0), buf))
            .collect()
    }
}

/// Single conditioned path from `rng` (path index 0 of that stream).
pub fn rejection_corridor_sample(
    rng: RngStream,
    grid: &TimeGrid,
    proposal: Proposal,
    k: &Corridor,
    margins: (f64, f64),
    crossing_corrected: bool,
    max_attempts: u64,
) -> Result<(SamplePath, RejectionStats)> {
    RejectionSampler::new(*grid, proposal, k, margins, crossing_corrected, max_attempts)?.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuous_corridor_accepts_everything() {
        let k = Corridor::flat(-1e6, 1e6).unwrap();
        let s = RejectionSampler::new(TimeGrid::unit(64), Proposal::Bridge { a: 0.0, b: 0.0 }, &k, (0.0, 0.0), true, 10).unwrap();
        let acc = s.acceptance_trials(RngStream::root(1), 2000);
        assert!(acc.iter().all(|&a| a));
    }

    #[test]
    fn crossing_correction_only_removes_paths() {
        let k = Corridor::flat(0.0, 1.0).unwrap();
        let g = TimeGrid::unit(512);
        let p = Proposal::Bridge { a: 0.5, b: 0.5 };
        let node = RejectionSampler::new(g, p.clone(), &k, (0.0, 0.0), false, 1).unwrap().acceptance_trials(RngStream::root(3), 4000);
        let corr = RejectionSampler::new(g, p, &k, (0.0, 0.0), true, 1).unwrap().acceptance_trials(RngStream::root(3), 4000);
        assert!(node.iter().zip(&corr).all(|(a, b)| *a || !*b));
        let (na, ca) = (node.iter().filter(|&&a| a).count(), corr.iter().filter(|&&a| a).count());
        assert!(ca < na);
    }

    #[test]
    fn widening_margins_never_reduces_acceptance() {
        let k = Corridor::flat(0.0, 1.0).unwrap();
        let g = TimeGrid::unit(128);
        let p = Proposal::Bridge { a: 0.0, b: 1.0 };
        let narrow = RejectionSampler::new(g, p.clone(), &k, (0.05, 0.05), true, 1).unwrap().acceptance_trials(RngStream::root(8), 3000);
        let wide = RejectionSampler::new(g, p, &k, (0.1, 0.1), true, 1).unwrap().acceptance_trials(RngStream::root(8), 3000);
        assert!(narrow.iter().zip(&wide).all(|(a, b)| !*a || *b));
    }

    #[test]
    fn accepted_paths_are_contained() {
        let k = Corridor::flat(0.0, 1.0).unwrap();
        let g = TimeGrid::unit(100);
        let s = RejectionSampler::new(g, Proposal::Bridge { a: 0.5, b: 0.5 }, &k, (0.0, 0.0), true, 1000).unwrap();
        let (e, st) = s.ensemble(RngStream::root(2), 200, &Record::Full).unwrap();
        assert!(st.rate() > 0.0 && st.rate() < 1.0);
        for i in 0..e.len() {
            assert!(k.contains(&e.path(i).unwrap(), 0.0, 0.0));
        }
    }

    #[test]
    fn budget_error_carries_rate() {
        let k = Corridor::flat(0.0, 0.01).unwrap();
        let e = rejection_corridor_sample(RngStream::root(1), &TimeGrid::unit(100), Proposal::Bridge { a: 0.005, b: 0.005 }, &k, (0.0, 0.0), true, 5)
            .unwrap_err();
        assert!(matches!(e, Error::RejectionBudget { attempts: 5, .. }));
    }
}
