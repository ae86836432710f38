//! Radon–Nikodym chain, Bessel identification of the wall case, and the
//! μ ≡ 0 degeneration of every drifted quantity.

use super::{combined, Functional, TestReport, Verdict};
use crate::conditioned::{
    log_nocross, map_draws, sample_boundary_case, Anchor, BoundaryCase, EndAnchor, EpsilonSchedule, HouseMovingSampler, LevelSampler, RunSettings,
};
use crate::corridor::{Corridor, SamplePath, TimeGrid};
use crate::drift::{CameronMartin, DriftModel};
use crate::error::{Error, Result};
use crate::exact::{fill_bes3_bridge, sample_bes3};
use crate::reweighting::{kernel_grid, snis_values, HouseMovingTables, MeanderTables, RnTables, TableSettings, TransitionTables};
use crate::rng::RngStream;
use crate::stats::{mean_se, weighted_ks};
use std::f64::consts::PI;
use std::time::Instant;

/// R + g⁻ on [t_start, t] with R a BES(3) process from 0.
fn bessel_probe(k: &Corridor, grid: &TimeGrid, stream: RngStream) -> Result<SamplePath> {
    Ok(sample_bes3(stream, grid, 0.0)?.shifted(k.lower(), 1.0))
}

/// rn_chain against rn_cor3 on `probes` paths of R + g⁻, and the
/// importance-sampling identity E[f(H_μ|[0,t])] = E[f(R + g⁻)·rn_cor3].
#[allow(clippy::too_many_arguments)]
pub fn check_rn_chain(
    d: &DriftModel,
    k: &Corridor,
    t: f64,
    f: &Functional,
    probes: usize,
    paths: usize,
    set: &TableSettings,
    stream: RngStream,
) -> Result<TestReport> {
    let clock = Instant::now();
    let tables = RnTables::estimate(k, d, t, set, stream.labeled("tables"))?;
    let full = TimeGrid::unit(set.steps.max(2));
    let ti = full.index_of(t).filter(|&i| i > 0).ok_or_else(|| Error::Domain(format!("time {t} must be a node of the unit grid")))?;
    let grid = full.slice(0, ti)?;

    // Pathwise chain.
    let mut ratios = Vec::new();
    for i in 0..probes as u64 {
        let w = bessel_probe(k, &grid, stream.labeled("probes").substream(i))?;
        let (a, b) = (tables.rn_cor3(&w)?, tables.rn_chain(&w)?);
        if a.value > 0.0 && a.value.is_finite() {
            ratios.push(b.value / a.value);
        }
    }
    if ratios.is_empty() {
        return Err(Error::starvation("rn chain", "every probe path left the corridor"));
    }
    let r0 = ratios[0];
    let spread = ratios.iter().map(|r| (r - r0).abs()).fold(0.0, f64::max) / r0;
    let rel = tables.chain_ratio_rel_se();
    let chain_ok = (r0 - 1.0).abs() <= 3.0 * rel && spread < 1e-9;

    // Importance-sampling identity.
    let hm = HouseMovingSampler::new(k, full, full.time(full.n_steps() / 2), d.clone())?;
    let (lw, lv): (Vec<f64>, Vec<f64>) = map_draws(&hm, stream.labeled("house-moving"), paths, |p, dr| (dr.log_weight(), f.eval(&grid, &p[..=ti]))).into_iter().unzip();
    let left = snis_values(&lw, &lv)?;
    let mut prod = Vec::with_capacity(paths);
    let mut rn = Vec::with_capacity(paths);
    let mut rel_sum = 0.0;
    for i in 0..paths as u64 {
        let w = bessel_probe(k, &grid, stream.labeled("importance").substream(i))?;
        let v = tables.rn_cor3(&w)?;
        if v.value > 0.0 {
            rel_sum += v.rel_se;
        }
        prod.push(v.value * f.eval(&grid, w.values()));
        rn.push(v.value);
    }
    let (right, right_mc) = mean_se(&prod);
    let (rn_mean, rn_se) = mean_se(&rn);
    let table_rel = rel_sum / rn.iter().filter(|&&v| v > 0.0).count().max(1) as f64;
    let right_se = combined(right_mc, right.abs() * table_rel);
    let z = (left.estimate - right) / combined(left.std_err, right_se);
    let ok = chain_ok && z.abs() <= 3.0;
    let mut r = TestReport::new("rn_chain", stream.seed)
        .stat("chain_over_cor3", r0)
        .stat("chain_over_cor3_rel_se", rel)
        .stat("ratio_spread_across_probes", spread)
        .stat("direct", left.estimate)
        .stat("direct_se", left.std_err)
        .stat("importance", right)
        .stat("importance_se", right_se)
        .stat("importance_diff_in_se", z)
        .stat("rn_mean", rn_mean)
        .stat("rn_mean_se", rn_se)
        .threshold("se_multiple", 3.0)
        .samples("probe_paths", ratios.len())
        .samples("paths", paths)
        .verdict(Verdict::from_bool(ok));
    r.runtime = clock.elapsed();
    Ok(r)
}

/// Case (ii) on a corridor with a flat lower wall: the finest schedule level
/// at time t against exact BES(3) bridges from the wall to `y`.
#[allow(clippy::too_many_arguments)]
pub fn check_bessel_identification(
    k: &Corridor,
    y: f64,
    t: f64,
    schedule: &EpsilonSchedule,
    grid: &TimeGrid,
    paths: usize,
    stream: RngStream,
) -> Result<TestReport> {
    let clock = Instant::now();
    if !k.lower().is_flat() {
        return Err(Error::Domain("Bessel identification needs a flat lower wall".into()));
    }
    let lo = k.lo(grid.t_start());
    let case = BoundaryCase { start: Anchor::OnLower, end: EndAnchor::Interior(y) };
    let settings = RunSettings::new(paths, LevelSampler::Smc { resample_threshold: 0.5 }).probes(vec![t]);
    let run = sample_boundary_case(stream.labeled("schedule"), grid, k, &case, schedule, &settings)?;
    let j = grid.index_of(t).ok_or_else(|| Error::Argument(format!("time {t} is not a grid node")))?;
    let exact: Vec<f64> = (0..paths as u64)
        .map(|i| {
            let mut v = vec![0.0; grid.len()];
            fill_bes3_bridge(&mut stream.labeled("bessel").substream(i).rng(), grid, 0.0, y - lo, &mut v);
            lo + v[j]
        })
        .collect();
    let zeros = vec![0.0; paths];
    let mut r = TestReport::new("bessel_identification", stream.seed);
    let mut p_last = 0.0;
    for lvl in &run.levels {
        let e = &lvl.ensemble;
        let (ks, p) = weighted_ks(&e.column(j).expect("probe node"), e.log_weights(), &exact, &zeros)?;
        r = r.stat(format!("ks_eps{:.5}", lvl.eps), ks).stat(format!("p_eps{:.5}", lvl.eps), p);
        p_last = p;
    }
    let mut r = r
        .stat("finest_p_value", p_last)
        .stat("finest_ess", run.finest().ensemble.ess())
        .threshold("p_value_min", 0.01)
        .samples("paths", paths)
        .verdict(Verdict::from_bool(p_last > 0.01));
    for w in &run.warnings {
        r = r.note(w.clone());
    }
    r.runtime = clock.elapsed();
    Ok(r)
}

/// With μ ≡ 0 every drifted estimator must coincide with its Brownian twin
/// on matched seeds: h_μ = h, k_μ = k, zero log-weights, RN evaluators in
/// their Brownian form.
pub fn check_degeneration(k: &Corridor, t: f64, set: &TableSettings, paths: usize, stream: RngStream) -> Result<TestReport> {
    let clock = Instant::now();
    let zero = DriftModel::Zero;
    let mut failures = Vec::new();

    let hm = HouseMovingTables::estimate(k, &zero, t, set, stream.labeled("house-moving"))?;
    let max_diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let d_h = max_diff(&hm.h(k)?.values, &hm.h_mu(k)?.values);
    if d_h != 0.0 {
        failures.push("h_mu differs from h");
    }

    let ys = kernel_grid(k, t, set.nodes);
    let start = (k.t_start() + 0.5 * (t - k.t_start()), 0.5 * (k.lo(t) + k.hi(t)));
    let tr = TransitionTables::estimate(k, &zero, start, t, &ys, set, stream.labeled("transition"))?;
    let d_tr = max_diff(&tr.h(k)?.values, &tr.h_mu(k)?.values);
    if d_tr != 0.0 {
        failures.push("transition h_mu differs from h");
    }

    let me = MeanderTables::estimate(k, &zero, t, k.t_end(), set, stream.labeled("meander"))?;
    let d_k = max_diff(&me.k(k)?.values, &me.k_mu(k)?.values);
    if d_k != 0.0 {
        failures.push("k_mu differs from k");
    }

    let grid = TimeGrid::unit(set.steps.max(4));
    let sampler = HouseMovingSampler::new(k, grid, grid.time(grid.n_steps() / 2), zero.clone())?;
    let nonzero = map_draws(&sampler, stream.labeled("weights"), paths, |_, d| d.log_girsanov != 0.0).into_iter().filter(|&b| b).count();
    if nonzero > 0 {
        failures.push("nonzero Girsanov log-weights");
    }

    let rn = RnTables::estimate(k, &zero, t, set, stream.labeled("rn"))?;
    let ti = grid.index_of(t).ok_or_else(|| Error::Domain(format!("time {t} must be a node of the unit grid")))?;
    let sub = grid.slice(0, ti)?;
    let cm = CameronMartin::new(k.lower(), &sub);
    let mut d_rn: f64 = 0.0;
    for i in 0..20u64 {
        let w = bessel_probe(k, &sub, stream.labeled("rn-probes").substream(i))?;
        let v = rn.rn_cor3(&w)?;
        let y = w.end();
        let x = w.values();
        let gap = |j: usize| k.hi(sub.time(j)) - x[j];
        let ls: f64 = (0..x.len() - 1).map(|j| log_nocross(gap(j), gap(j + 1), sub.dt())).sum();
        let brownian = if ls > f64::NEG_INFINITY {
            (PI / 2.0).sqrt() * rn.q_down.eval(y)?.0 / (rn.c.value * (1.0 - t).sqrt() * (y - k.lo(t))) * (ls - cm.log_z(x)).exp()
        } else {
            0.0
        };
        d_rn = d_rn.max((v.value - brownian).abs() / brownian.abs().max(1e-300));
    }
    if rn.e_h.value != 1.0 || rn.e_h.std_err != 0.0 || rn.inner_down.values.iter().any(|&v| v != 1.0) || d_rn > 1e-12 {
        failures.push("RN evaluator differs from its Brownian form");
    }

    let mut r = TestReport::new("degeneration", stream.seed)
        .stat("max_abs_diff_h", d_h)
        .stat("max_abs_diff_transition_h", d_tr)
        .stat("max_abs_diff_k", d_k)
        .stat("nonzero_log_weights", nonzero as f64)
        .stat("max_rel_diff_rn_cor3", d_rn)
        .threshold("rn_rel_tolerance", 1e-12)
        .samples("paths_per_node", set.paths)
        .samples("weight_paths", paths)
        .verdict(Verdict::from_bool(failures.is_empty()));
    for f in failures {
        r = r.note(f);
    }
    r.runtime = clock.elapsed();
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> TableSettings {
        TableSettings { steps: 128, paths: 1500, nodes: 16, min_ess: 10.0 }
    }

    #[test]
    fn degeneration_is_exact() {
        let k = Corridor::flat(0.0, 1.0).unwrap();
        let set = TableSettings { steps: 64, paths: 300, nodes: 8, min_ess: 1.0 };
        let r = check_degeneration(&k, 0.5, &set, 200, RngStream::root(4)).unwrap();
        assert_eq!(r.verdict, Verdict::Pass, "{r}");
    }

    #[test]
    fn rn_chain_brownian() {
        let k = Corridor::flat(0.0, 1.0).unwrap();
        let r = check_rn_chain(&DriftModel::Zero, &k, 0.5, &Functional::ValueAt(0.25), 50, 3000, &small(), RngStream::root(12)).unwrap();
        assert!(r.passed(), "{r}");
        assert!(r.get("ratio_spread_across_probes").unwrap() < 1e-9);
        assert!((r.get("rn_mean").unwrap() - 1.0).abs() < 4.0 * r.get("rn_mean_se").unwrap() + 0.05, "{r}");
    }

    #[test]
    fn bessel_case_on_far_corridor() {
        let k = Corridor::flat(0.0, 6.0).unwrap();
        let grid = TimeGrid::unit(128);
        let sched = EpsilonSchedule::default_for(&k);
        let r = check_bessel_identification(&k, 1.0, 0.5, &sched, &grid, 3000, RngStream::root(5)).unwrap();
        assert!(r.passed(), "{r}");
    }
}
