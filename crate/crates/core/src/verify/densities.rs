//! Identities between transition densities: Chapman–Kolmogorov and
//! space-time reversal.

use super::{combined, TestReport, Verdict};
use crate::conditioned::{weighted_ensemble, HouseMovingSampler, Record};
use crate::corridor::{Corridor, TimeGrid};
use crate::drift::DriftModel;
use crate::error::{Error, Result};
use crate::reweighting::{bridge_pieces, kernel_grid, lower_pieces, upper_pieces, DensityEstimate, Estimate, TableSettings, TransitionTables};
use crate::rng::RngStream;
use crate::special::gauss_density;
use crate::stats::weighted_ks;
use std::time::Instant;

/// p_μ(t1, y1, t2, y) = p(y1, y)·E[e^{−½N}] of the interior bridge, one y.
fn p_mu_point(k: &Corridor, d: &DriftModel, (t1, y1): (f64, f64), t2: f64, y: f64, set: &TableSettings, stream: RngStream) -> Result<Estimate> {
    let st = bridge_pieces(k, d, (t1, y1), t2, &[y], set, stream)?.stats[0];
    st.check_ess("interior bridge", set.min_ess)?;
    let g = gauss_density(y - y1, t2 - t1);
    let v = st.base.value * st.zeta.value * g;
    Ok(Estimate::new(v, v * combined(st.base.rel(), st.zeta.rel())))
}

/// q↓_μ(t, y)/√(1 − t): the end factor of h_μ(·, ·, t, y).
fn end_factor(k: &Corridor, d: &DriftModel, t: f64, y: f64, set: &TableSettings, stream: RngStream) -> Result<Estimate> {
    let st = upper_pieces(k, d, t, &[y], set, stream)?.stats[0];
    let s = k.t_end() - t;
    let u = k.hi(t) - y;
    let rho = u / s * (-u * u / (2.0 * s)).exp();
    let v = st.base.value * st.zeta.value * rho / s.sqrt();
    Ok(Estimate::new(v, v * combined(st.base.rel(), st.zeta.rel())))
}

/// Both Chapman–Kolmogorov identities for h_μ at times s < t < u.
///
/// Mass: ∫h_μ(s, x, t, y)dy = 1. Composition:
/// ∫h_μ(s, x, t, y)h_μ(t, y, u, z)dy = h_μ(s, x, u, z). The q↓ factors at t
/// cancel inside the integral, so the composition is compared on the core
/// ∫p_μ(x, y)p_μ(y, z)dy against p_μ(x, z) and reported on the h scale.
#[allow(clippy::too_many_arguments)]
pub fn check_chapman_kolmogorov(
    d: &DriftModel,
    k: &Corridor,
    (s, t, u): (f64, f64, f64),
    x: f64,
    z: f64,
    set: &TableSettings,
    stream: RngStream,
) -> Result<TestReport> {
    let clock = Instant::now();
    if !(k.t_start() < s && s < t && t < u && u < k.t_end()) {
        return Err(Error::Domain(format!("need t_start < s < t < u < t_end, got ({s}, {t}, {u})")));
    }
    if !(z > k.lo(u) && z < k.hi(u)) {
        return Err(Error::Domain(format!("z = {z} not strictly inside the corridor at u = {u}")));
    }
    let ys = kernel_grid(k, t, set.nodes);
    let first = TransitionTables::estimate(k, d, (s, x), t, &ys, set, stream.labeled("first-leg"))?;
    let h1 = first.h_mu(k)?;
    let (mass, mass_se) = (h1.mass, h1.mass_se);

    // Core composition with the interior-bridge legs.
    first.bridge.check_ess("interior bridge", set.min_ess)?;
    let leg_stream = stream.labeled("second-leg");
    let w = DensityEstimate::from_nodes(ys.clone(), vec![0.0; ys.len()], &vec![0.0; ys.len()], 0.0, (k.lo(t), k.hi(t)))?.quadrature_weights();
    let (mut comp, mut comp_var) = (0.0, 0.0);
    for (j, &y) in ys.iter().enumerate() {
        let st = first.bridge.stats[j];
        let a = first.p.values[j] * st.zeta.value;
        let a_se = a * combined(first.p.std_err[j] / first.p.values[j].max(f64::MIN_POSITIVE), st.zeta.rel());
        let b = p_mu_point(k, d, (t, y), u, z, set, leg_stream.substream(j as u64))?;
        comp += w[j] * a * b.value;
        comp_var += w[j] * w[j] * (a * a * b.std_err * b.std_err + b.value * b.value * a_se * a_se);
    }
    let comp = Estimate::new(comp, comp_var.sqrt());
    let direct = p_mu_point(k, d, (s, x), u, z, set, stream.labeled("direct"))?;

    // Common factor q↓_μ(u, z)/√(1−u) ÷ q↓_μ(s, x)/√(1−s).
    let num = end_factor(k, d, u, z, set, stream.labeled("end-u"))?;
    let den = end_factor(k, d, s, x, set, stream.labeled("end-s"))?;
    let factor = num.value / den.value;

    let mass_ok = (mass - 1.0).abs() <= 5.0 * mass_se;
    let diff = comp.value - direct.value;
    let comp_se = combined(comp.std_err, direct.std_err);
    let comp_ok = diff.abs() <= 5.0 * comp_se;
    let mut r = TestReport::new("chapman_kolmogorov", stream.seed)
        .stat("mass", mass)
        .stat("mass_se", mass_se)
        .stat("composed_h", comp.value * factor)
        .stat("direct_h", direct.value * factor)
        .stat("composed_core", comp.value)
        .stat("direct_core", direct.value)
        .stat("core_diff_in_se", diff / comp_se)
        .threshold("mass_se_multiple", 5.0)
        .threshold("composition_se_multiple", 5.0)
        .samples("paths_per_node", set.paths)
        .samples("nodes", ys.len())
        .verdict(Verdict::from_bool(mass_ok && comp_ok));
    if !mass_ok {
        r = r.note("mass identity outside tolerance");
    }
    if !comp_ok {
        r = r.note("composition identity outside tolerance");
    }
    r.runtime = clock.elapsed();
    Ok(r)
}

/// Space-time reversal on a flat corridor: the law of H_μ(t) against b − H_μ(1 − t).
///
/// Asserted (p > 0.01) only for constant μ. For other drifts the report is a
/// probe that also records the four inner expectations of the reversal
/// criterion at three points across the corridor.
pub fn check_reversal(d: &DriftModel, k: &Corridor, t: f64, paths: usize, set: &TableSettings, stream: RngStream) -> Result<TestReport> {
    let clock = Instant::now();
    if !k.is_flat() || k.lo(0.0) != 0.0 || k.t_start() != 0.0 || k.t_end() != 1.0 {
        return Err(Error::Domain("reversal check needs the flat corridor [0, b] on [0, 1]".into()));
    }
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Domain(format!("reversal time {t} must lie in (0, 1)")));
    }
    let b = k.hi(0.0);
    let grid = TimeGrid::unit(set.steps.max(2));
    let (i, j) = (grid.nearest_index(t), grid.nearest_index(1.0 - t));
    let sampler = HouseMovingSampler::new(k, grid, grid.time(grid.n_steps() / 2), d.clone())?;
    let e1 = weighted_ensemble(&sampler, stream.labeled("forward"), paths, &Record::Nodes(vec![i]))?;
    let e2 = weighted_ensemble(&sampler, stream.labeled("mirrored"), paths, &Record::Nodes(vec![j]))?;
    let xs = e1.column(i).expect("recorded node");
    let ys: Vec<f64> = e2.column(j).expect("recorded node").iter().map(|v| b - v).collect();
    let (ks, p) = weighted_ks(&xs, e1.log_weights(), &ys, e2.log_weights())?;
    let constant = d.constant_value().is_some();
    let mut r = TestReport::new("reversal", stream.seed)
        .stat("ks_statistic", ks)
        .stat("p_value", p)
        .stat("ess_forward", e1.ess())
        .stat("ess_mirrored", e2.ess())
        .threshold("p_value_min", 0.01)
        .samples("paths_per_side", paths)
        .verdict(if constant { Verdict::from_bool(p > 0.01) } else { Verdict::Probe });
    if !constant {
        let nodes: Vec<f64> = [0.25, 0.5, 0.75].iter().map(|f| f * b).collect();
        let mirrored: Vec<f64> = nodes.iter().map(|y| b - y).collect();
        let s = stream.labeled("criterion");
        let l1 = lower_pieces(k, d, t, &nodes, set, s.labeled("lower-t"))?;
        let u1 = upper_pieces(k, d, t, &nodes, set, s.labeled("upper-t"))?;
        let l2 = lower_pieces(k, d, 1.0 - t, &mirrored, set, s.labeled("lower-mirror"))?;
        let u2 = upper_pieces(k, d, 1.0 - t, &mirrored, set, s.labeled("upper-mirror"))?;
        for (n, y) in nodes.iter().enumerate() {
            let lhs = l1.stats[n].zeta.value * u1.stats[n].zeta.value;
            let rhs = l2.stats[n].zeta.value * u2.stats[n].zeta.value;
            r = r.stat(format!("criterion_lhs_y{y:.3}"), lhs).stat(format!("criterion_rhs_y{y:.3}"), rhs);
        }
        r = r.note("non-constant drift: reversal recorded without a verdict");
    }
    r.runtime = clock.elapsed();
    Ok(r)
}
