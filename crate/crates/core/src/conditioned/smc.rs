//! Sequential Monte Carlo for corridor-conditioned bridges and unpinned paths.
//!
//! Particles move with the Brownian (bridge) kernel truncated to the widened
//! corridor at the next node. The incremental weight is the truncated
//! Gaussian mass times the per-step no-crossing probability, optionally times
//! the Girsanov factor exp(−½∫(μ′+μ²)) and, for a free end, exp(G(x_T)).
//! Systematic resampling fires when ESS drops below `threshold·N`.

use super::crossing::log_step_survival;
use super::ensemble::{Record, WeightedEnsemble};
use super::schedule::BoundaryCase;
use crate::corridor::{Corridor, TimeGrid};
use crate::drift::DriftModel;
use crate::error::{Error, Result};
use crate::rng::{PathRng, RngStream};
use crate::special::truncated_normal;
use crate::stats::{ess, logsumexp};
use rand::Rng;
use rayon::prelude::*;

const RESAMPLE_TAG: u64 = 0x5245_5341;

/// SMC run output.
#[derive(Debug, Clone)]
pub struct SmcOutput {
    pub ensemble: WeightedEnsemble,
    /// ESS after weighting at each step.
    pub ess_trajectory: Vec<f64>,
    /// ln of the estimated normalizing constant E[Π incremental weights].
    pub log_normalizer: f64,
    pub resample_count: usize,
}

struct Particle {
    x: f64,
    rng: PathRng,
}

/// Systematic resampling; returns ancestor indices.
fn systematic_resample(weights: &[f64], u: f64) -> Vec<usize> {
    let n = weights.len();
    let mut anc = Vec::with_capacity(n);
    let mut c = weights[0];
    let mut i = 0;
    for j in 0..n {
        let target = (j as f64 + u) / n as f64;
        while target > c && i < n - 1 {
            i += 1;
            c += weights[i];
        }
        anc.push(i);
    }
    anc
}

/// Weighted conditioned ensemble by SMC.
#[allow(clippy::too_many_arguments)]
pub fn smc_corridor_sample(
    rng: RngStream,
    grid: &TimeGrid,
    drift: Option<&DriftModel>,
    k: &Corridor,
    margins: (f64, f64),
    case: &BoundaryCase,
    particles: usize,
    resample_threshold: f64,
    record: &Record,
) -> Result<SmcOutput> {
    if particles < 2 {
        return Err(Error::Argument("SMC needs at least two particles".into()));
    }
    if !(0.0..=1.0).contains(&resample_threshold) {
        return Err(Error::Argument("resample threshold must lie in [0, 1]".into()));
    }
    k.check_grid(grid)?;
    let drift = drift.filter(|d| !d.is_zero());
    let n = grid.n_steps();
    let dt = grid.dt();
    let nodes = k.nodes(grid, margins.0, margins.1);
    let x0 = case.start_value(k, grid.t_start());
    let end = case.end_value(k, grid.t_end());
    if !(x0 >= nodes.lo[0] && x0 <= nodes.hi[0]) {
        return Err(Error::Domain(format!("start {x0} outside the widened corridor")));
    }
    if let Some(b) = end {
        if !(b >= nodes.lo[n] && b <= nodes.hi[n]) {
            return Err(Error::Domain(format!("end {b} outside the widened corridor")));
        }
    }

    let record_nodes = record.node_list(grid);
    let mut is_recorded = vec![false; grid.len()];
    record_nodes.iter().for_each(|&j| is_recorded[j] = true);
    let mut history: Vec<Option<Vec<f64>>> = vec![None; grid.len()];
    let mut ancestry: Vec<Option<Vec<usize>>> = vec![None; grid.len()];
    if is_recorded[0] {
        history[0] = Some(vec![x0; particles]);
    }

    let mut ps: Vec<Particle> = (0..particles as u64).map(|j| Particle { x: x0, rng: rng.substream(j).rng() }).collect();
    let mut lw = vec![0.0; particles];
    let mut inc = vec![0.0; particles];
    let mut resampler = rng.child(RESAMPLE_TAG).rng();
    let mut ess_traj = Vec::with_capacity(n);
    let mut log_z = 0.0;
    let mut resample_count = 0;
    let mut lse_prev = (particles as f64).ln();

    for i in 0..n {
        let rem = n - i;
        let (lo0, lo1, hi0, hi1) = (nodes.lo[i], nodes.lo[i + 1], nodes.hi[i], nodes.hi[i + 1]);
        let last = i + 1 == n;
        ps.par_iter_mut().zip(inc.par_iter_mut()).with_min_len(512).for_each(|(p, w)| {
            let x = p.x;
            let (y, ln_mass) = match end {
                Some(b) if rem == 1 => (b, 0.0),
                Some(b) => {
                    let r = rem as f64;
                    truncated_normal(&mut p.rng, x + (b - x) / r, (dt * (r - 1.0) / r).sqrt(), lo1, hi1)
                }
                None => truncated_normal(&mut p.rng, x, dt.sqrt(), lo1, hi1),
            };
            let mut l = ln_mass + log_step_survival(x, y, lo0, lo1, hi0, hi1, dt);
            if let Some(d) = drift {
                l -= 0.25 * dt * (d.phi(x) + d.phi(y));
                if last && end.is_none() {
                    l += d.big_g(y).unwrap_or(f64::NEG_INFINITY);
                }
            }
            p.x = y;
            *w = l;
        });
        lw.iter_mut().zip(&inc).for_each(|(a, b)| *a += b);
        let lse = logsumexp(&lw);
        if lse == f64::NEG_INFINITY {
            return Err(Error::degeneracy("smc", format!("all particles died at step {}", i + 1)));
        }
        log_z += lse - lse_prev;
        lse_prev = lse;
        let e = ess(&lw);
        ess_traj.push(e);

        if !last && e < resample_threshold * particles as f64 {
            let m = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut w: Vec<f64> = lw.iter().map(|v| (v - m).exp()).collect();
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= s);
            let anc = systematic_resample(&w, resampler.random::<f64>());
            let xs: Vec<f64> = anc.iter().map(|&a| ps[a].x).collect();
            ps.iter_mut().zip(xs).for_each(|(p, x)| p.x = x);
            lw.iter_mut().for_each(|v| *v = 0.0);
            lse_prev = (particles as f64).ln();
            ancestry[i + 1] = Some(anc);
            resample_count += 1;
        }
        if is_recorded[i + 1] {
            history[i + 1] = Some(ps.iter().map(|p| p.x).collect());
        }
    }

    // Trace lineages back through the recorded nodes.
    let m = record_nodes.len();
    let mut values = vec![0.0; particles * m];
    let mut idx: Vec<usize> = (0..particles).collect();
    for s in (0..=n).rev() {
        if is_recorded[s] {
            let col = record_nodes.binary_search(&s).expect("recorded node");
            let h = history[s].as_ref().expect("history kept");
            for (j, &ix) in idx.iter().enumerate() {
                values[j * m + col] = h[ix];
            }
        }
        if let Some(anc) = &ancestry[s] {
            idx.iter_mut().for_each(|ix| *ix = anc[*ix]);
        }
    }
    let ensemble = WeightedEnsemble::new(*grid, record_nodes, values, lw)?;
    Ok(SmcOutput { ensemble, ess_trajectory: ess_traj, log_normalizer: log_z, resample_count })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditioned::schedule::{Anchor, EndAnchor};

    fn bridge_case(a: f64, b: f64) -> BoundaryCase {
        BoundaryCase { start: Anchor::Interior(a), end: EndAnchor::Interior(b) }
    }

    #[test]
    fn wide_corridor_keeps_uniform_weights() {
        let k = Corridor::flat(-1e6, 1e6).unwrap();
        let out = smc_corridor_sample(RngStream::root(1), &TimeGrid::unit(50), None, &k, (0.0, 0.0), &bridge_case(0.0, 0.0), 500, 0.5, &Record::Full)
            .unwrap();
        assert!((out.ensemble.ess() - 500.0).abs() < 1e-9);
        assert_eq!(out.resample_count, 0);
        assert!(out.log_normalizer.abs() < 1e-12);
    }

    #[test]
    fn paths_are_contained_and_pinned() {
        let k = Corridor::flat(0.0, 1.0).unwrap();
        let g = TimeGrid::unit(64);
        let out = smc_corridor_sample(RngStream::root(4), &g, None, &k, (0.01, 0.01), &BoundaryCase::housemoving(), 300, 0.5, &Record::Full).unwrap();
        for i in 0..out.ensemble.len() {
            let p = out.ensemble.path(i).unwrap();
            assert!(k.contains(&p, 0.01, 0.01));
            assert_eq!((p.start(), p.end()), (0.0, 1.0));
        }
        assert!(out.ensemble.ess() <= 300.0);
        assert!(out.resample_count > 0);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let k = Corridor::flat(0.0, 1.0).unwrap();
        let g = TimeGrid::unit(64);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
                smc_corridor_sample(RngStream::root(9), &g, None, &k, (0.0, 0.0), &bridge_case(0.5, 0.5), 3000, 0.5, &Record::Full).unwrap()
            })
        };
        let (a, b) = (run(1), run(4));
        assert_eq!(a.ensemble, b.ensemble);
        assert_eq!(a.log_normalizer, b.log_normalizer);
    }

    #[test]
    fn systematic_resampling_is_proportional() {
        let anc = systematic_resample(&[0.5, 0.25, 0.25, 0.0], 0.5);
        assert_eq!(anc, vec![0, 0, 1, 2]);
    }
}
