//! Reweighted Brownian paths against direct Euler–Maruyama simulation.

use super::{combined, Functional, TestReport, Verdict};
use crate::conditioned::log_path_survival;
use crate::corridor::{Corridor, TimeGrid};
use crate::drift::{n_functional, DriftModel};
use crate::error::{Error, Result};
use crate::exact::{fill_bridge, fill_brownian, fill_diffusion};
use crate::reweighting::snis_values;
use crate::rng::RngStream;
use rayon::prelude::*;
use std::time::Instant;

const MIN_ACCEPTED: usize = 30;

/// E[f(X) | A] for dX = μ(X)dt + dW from `a`, optionally pinned at `b`.
///
/// Left: Euler–Maruyama paths weighted by their crossing-corrected survival
/// of A, kept when |X(1) − b| < w for pinned targets. The window doubles
/// until at least 30 paths are kept. Right: Brownian paths (bridges when
/// pinned) weighted by 1_A and e^{G(end) − ½N} (e^{−½N} when pinned).
/// Passes iff |L − R| ≤ 3 combined SE + Δ + w².
#[allow(clippy::too_many_arguments)]
pub fn girsanov_consistency(
    d: &DriftModel,
    event: Option<&Corridor>,
    a: f64,
    b: Option<f64>,
    f: &Functional,
    paths: usize,
    steps: usize,
    window: f64,
    stream: RngStream,
) -> Result<TestReport> {
    let clock = Instant::now();
    let grid = TimeGrid::unit(steps);
    let nodes = match event {
        Some(k) => {
            k.check_grid(&grid)?;
            Some(k.nodes(&grid, 0.0, 0.0))
        }
        None => None,
    };
    let inside = |x: f64, t: f64| event.is_none_or(|k| x > k.lo(t) && x < k.hi(t));
    if !inside(a, 0.0) || b.is_some_and(|b| !inside(b, 1.0)) {
        return Err(Error::Domain("end points must lie strictly inside the event corridor".into()));
    }
    let survival = |p: &[f64]| nodes.as_ref().map_or(0.0, |n| log_path_survival(p, n, grid.dt(), true));

    // Left side: direct simulation.
    let em: Vec<(f64, f64, f64)> = (0..paths as u64)
        .into_par_iter()
        .map_init(
            || vec![0.0; grid.len()],
            |buf, i| -> Result<(f64, f64, f64)> {
                fill_diffusion(&mut stream.labeled("euler").substream(i).rng(), &grid, d, a, buf)?;
                Ok((buf[grid.n_steps()], survival(buf), f.eval(&grid, buf)))
            },
        )
        .collect::<Result<Vec<_>>>()?;
    let mut w = window;
    let mut notes = Vec::new();
    let select = |w: f64| -> Vec<&(f64, f64, f64)> { em.iter().filter(|(x, ls, _)| ls.is_finite() && b.is_none_or(|b| (x - b).abs() < w)).collect() };
    let mut kept = select(w);
    while b.is_some() && kept.len() < MIN_ACCEPTED && w < 1.0 {
        w *= 2.0;
        kept = select(w);
        notes.push(format!("endpoint window widened to {w}"));
    }
    if kept.len() < 2 {
        return Err(Error::starvation("girsanov consistency", format!("{} of {paths} direct paths kept", kept.len())));
    }
    let (lw, fv): (Vec<f64>, Vec<f64>) = kept.iter().map(|(_, ls, fx)| (*ls, *fx)).unzip();
    let left = snis_values(&lw, &fv)?;

    // Right side: reweighted Brownian paths.
    let bm: Vec<(f64, f64)> = (0..paths as u64)
        .into_par_iter()
        .map_init(
            || vec![0.0; grid.len()],
            |buf, i| {
                let mut rng = stream.labeled("brownian").substream(i).rng();
                match b {
                    Some(b) => fill_bridge(&mut rng, &grid, a, b, buf),
                    None => fill_brownian(&mut rng, &grid, a, buf),
                }
                let ls = survival(buf);
                if !ls.is_finite() || d.is_zero() {
                    return (ls, f.eval(&grid, buf));
                }
                let mut g = -0.5 * n_functional(d, buf, grid.dt());
                if b.is_none() {
                    g += d.big_g(buf[grid.n_steps()]).unwrap_or(f64::NEG_INFINITY);
                }
                (ls + g, f.eval(&grid, buf))
            },
        )
        .collect();
    let (rw, rv): (Vec<f64>, Vec<f64>) = bm.into_iter().unzip();
    let right = snis_values(&rw, &rv)?;

    let se = combined(left.std_err, right.std_err);
    let bias = grid.dt() + if b.is_some() { w * w } else { 0.0 };
    let diff = left.estimate - right.estimate;
    let mut r = TestReport::new("girsanov_consistency", stream.seed)
        .stat("direct", left.estimate)
        .stat("direct_se", left.std_err)
        .stat("reweighted", right.estimate)
        .stat("reweighted_se", right.std_err)
        .stat("reweighted_ess", right.ess)
        .stat("diff", diff)
        .stat("window", if b.is_some() { w } else { 0.0 })
        .threshold("se_multiple", 3.0)
        .threshold("bias_allowance", bias)
        .samples("paths", paths)
        .samples("direct_kept", kept.len())
        .verdict(Verdict::from_bool(diff.abs() <= 3.0 * se + bias));
    r.notes = notes;
    r.runtime = clock.elapsed();
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_drift_bridge_mean_is_linear() {
        let r = girsanov_consistency(&DriftModel::Constant { c: 0.8 }, None, 0.0, Some(1.0), &Functional::ValueAt(0.5), 4000, 128, 0.05, RngStream::root(3)).unwrap();
        assert!(r.passed(), "{r}");
        // Drift cancels in pinned laws: every weight is equal.
        assert!((r.get("reweighted_ess").unwrap() - 4000.0).abs() < 1e-6);
        assert!((r.get("reweighted").unwrap() - 0.5).abs() < 4.0 * r.get("reweighted_se").unwrap());
    }

    #[test]
    fn zero_drift_free_end_in_corridor() {
        let k = Corridor::flat(-1.0, 1.0).unwrap();
        let r = girsanov_consistency(&DriftModel::Zero, Some(&k), 0.2, None, &Functional::ValueAt(1.0), 3000, 64, 0.0, RngStream::root(5)).unwrap();
        assert!(r.passed(), "{r}");
    }

    #[test]
    fn ou_drift_free_end() {
        let r = girsanov_consistency(&DriftModel::Linear { a: 0.0, b: -1.0 }, None, 1.0, None, &Functional::ValueAt(1.0), 6000, 128, 0.0, RngStream::root(7)).unwrap();
        assert!(r.passed(), "{r}");
        // OU mean e^{-1} from x = 1.
        assert!((r.get("direct").unwrap() - (-1.0f64).exp()).abs() < 0.05);
    }

    #[test]
    fn window_widens_when_starved() {
        let r = girsanov_consistency(&DriftModel::Zero, None, 0.0, Some(2.5), &Functional::ValueAt(0.5), 300, 32, 0.001, RngStream::root(1)).unwrap();
        assert!(r.get("window").unwrap() > 0.001);
        assert!(!r.notes.is_empty());
    }
}
