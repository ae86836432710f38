//! Path decomposition of H_μ at one or two interior times.
//!
//! The right side integrates over y-nodes: at each node independent lower and
//! upper pieces are drawn and paired, so a pair has weight w₁w₂ with mean
//! q↑_μ q↓_μ up to the end-point densities. Node weights are therefore
//! proportional to h_μ(t, y), and C and E[e^{−½N(H)}] cancel in the ratio.

use super::{combined, Functional, TestReport, Verdict};
use crate::conditioned::{map_draws, HouseMovingSampler, InteriorSampler, PathSampler, UpperWallSampler, WallBridgeSampler};
use crate::corridor::{Corridor, TimeGrid};
use crate::drift::DriftModel;
use crate::error::{Error, Result};
use crate::reweighting::{kernel_grid, snis_values, DensityEstimate, Estimate, TableSettings};
use crate::rng::RngStream;
use crate::special::gauss_density;
use std::time::Instant;

fn rho(u: f64, s: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    u / s * (-u * u / (2.0 * s)).exp()
}

fn trapezoid_weights(k: &Corridor, t: f64, ys: &[f64]) -> Result<Vec<f64>> {
    let n = ys.len();
    Ok(DensityEstimate::from_nodes(ys.to_vec(), vec![0.0; n], &vec![0.0; n], 0.0, (k.lo(t), k.hi(t)))?.quadrature_weights())
}

fn draws<S: PathSampler>(s: &S, stream: RngStream, n: usize) -> Vec<(Vec<f64>, f64)> {
    map_draws(s, stream, n, |p, d| (p.to_vec(), d.log_weight()))
}

/// Accumulates Σ q·A and Σ q·B with per-node pair weights, for R = ΣqA/ΣqB.
#[derive(Default)]
struct Ratio {
    /// Per node: (quadrature weight × scale, pair weights, values).
    nodes: Vec<(f64, Vec<f64>, Vec<f64>)>,
}

impl Ratio {
    fn push(&mut self, scale: f64, w: Vec<f64>, f: Vec<f64>) {
        self.nodes.push((scale, w, f));
    }

    fn estimate(&self) -> Result<Estimate> {
        let (mut a, mut b) = (0.0, 0.0);
        for (q, w, f) in &self.nodes {
            let n = w.len() as f64;
            a += q * w.iter().zip(f).map(|(w, f)| w * f).sum::<f64>() / n;
            b += q * w.iter().sum::<f64>() / n;
        }
        if !(b > 0.0) {
            return Err(Error::starvation("decomposition", "no surviving spliced pairs"));
        }
        let r = a / b;
        let mut var = 0.0;
        for (q, w, f) in &self.nodes {
            let n = w.len() as f64;
            let d: Vec<f64> = w.iter().zip(f).map(|(w, f)| w * (f - r)).collect();
            let m = d.iter().sum::<f64>() / n;
            let v = d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
            var += q * q * v / n;
        }
        Ok(Estimate::new(r, var.sqrt() / b))
    }
}

fn left_side(d: &DriftModel, k: &Corridor, grid: TimeGrid, f: &Functional, paths: usize, stream: RngStream) -> Result<(Estimate, f64)> {
    let hm = HouseMovingSampler::new(k, grid, grid.time(grid.n_steps() / 2), d.clone())?;
    let (lw, fv): (Vec<f64>, Vec<f64>) = map_draws(&hm, stream, paths, |p, dr| (dr.log_weight(), f.eval(&grid, p))).into_iter().unzip();
    let s = snis_values(&lw, &fv)?;
    Ok((Estimate::new(s.estimate, s.std_err), s.ess))
}

/// Spliced estimate of E[f(H_μ)] with one split at `t`.
fn spliced_one(d: &DriftModel, k: &Corridor, grid: TimeGrid, t: f64, f: &Functional, set: &TableSettings, stream: RngStream) -> Result<Estimate> {
    let split = grid.nearest_index(t);
    if split == 0 || split == grid.n_steps() {
        return Err(Error::Domain(format!("split time {t} must be an interior grid node")));
    }
    let tau = grid.time(split);
    let g1 = TimeGrid::new(0.0, tau, split)?;
    let g2 = TimeGrid::new(tau, 1.0, grid.n_steps() - split)?;
    let ys = kernel_grid(k, tau, set.nodes);
    let q = trapezoid_weights(k, tau, &ys)?;
    let mut ratio = Ratio::default();
    let mut path = vec![0.0; grid.len()];
    for (j, &y) in ys.iter().enumerate() {
        let s = stream.substream(j as u64);
        let lower = draws(&WallBridgeSampler::new(k, g1, y, d.clone())?, s.labeled("lower"), set.paths);
        let upper = draws(&UpperWallSampler::new(k, g2, y, d.clone())?, s.labeled("upper"), set.paths);
        let mut w = Vec::with_capacity(set.paths);
        let mut fv = Vec::with_capacity(set.paths);
        for ((p1, l1), (p2, l2)) in lower.iter().zip(&upper) {
            let lw = l1 + l2;
            if lw == f64::NEG_INFINITY {
                w.push(0.0);
                fv.push(0.0);
                continue;
            }
            path[..=split].copy_from_slice(p1);
            path[split..].copy_from_slice(p2);
            w.push(lw.exp());
            fv.push(f.eval(&grid, &path));
        }
        let scale = q[j] * rho(y - k.lo(tau), tau) * rho(k.hi(tau) - y, 1.0 - tau);
        ratio.push(scale, w, fv);
    }
    ratio.estimate()
}

/// Spliced estimate with two splits t1 < t2 and an interior bridge between.
fn spliced_two(d: &DriftModel, k: &Corridor, grid: TimeGrid, (t1, t2): (f64, f64), f: &Functional, set: &TableSettings, stream: RngStream) -> Result<Estimate> {
    let (i1, i2) = (grid.nearest_index(t1), grid.nearest_index(t2));
    if !(0 < i1 && i1 < i2 && i2 < grid.n_steps()) {
        return Err(Error::Domain(format!("split times ({t1}, {t2}) must be increasing interior grid nodes")));
    }
    let (a, b) = (grid.time(i1), grid.time(i2));
    let g1 = TimeGrid::new(0.0, a, i1)?;
    let gm = TimeGrid::new(a, b, i2 - i1)?;
    let g2 = TimeGrid::new(b, 1.0, grid.n_steps() - i2)?;
    let y1s = kernel_grid(k, a, set.nodes);
    let y2s = kernel_grid(k, b, set.nodes);
    let (q1, q2) = (trapezoid_weights(k, a, &y1s)?, trapezoid_weights(k, b, &y2s)?);
    let lowers = y1s
        .iter()
        .enumerate()
        .map(|(j, &y)| Ok(draws(&WallBridgeSampler::new(k, g1, y, d.clone())?, stream.labeled("lower").substream(j as u64), set.paths)))
        .collect::<Result<Vec<_>>>()?;
    let uppers = y2s
        .iter()
        .enumerate()
        .map(|(j, &y)| Ok(draws(&UpperWallSampler::new(k, g2, y, d.clone())?, stream.labeled("upper").substream(j as u64), set.paths)))
        .collect::<Result<Vec<_>>>()?;
    let mut ratio = Ratio::default();
    let mut path = vec![0.0; grid.len()];
    for (j1, &y1) in y1s.iter().enumerate() {
        for (j2, &y2) in y2s.iter().enumerate() {
            let mid_stream = stream.labeled("middle").substream(j1 as u64).substream(j2 as u64);
            let mid = draws(&InteriorSampler::new(k, gm, y1, Some(y2), d.clone())?, mid_stream, set.paths);
            let mut w = Vec::with_capacity(set.paths);
            let mut fv = Vec::with_capacity(set.paths);
            for ((p1, l1), ((pm, lm), (p2, l2))) in lowers[j1].iter().zip(mid.iter().zip(&uppers[j2])) {
                let lw = l1 + lm + l2;
                if lw == f64::NEG_INFINITY {
                    w.push(0.0);
                    fv.push(0.0);
                    continue;
                }
                path[..=i1].copy_from_slice(p1);
                path[i1..=i2].copy_from_slice(pm);
                path[i2..].copy_from_slice(p2);
                w.push(lw.exp());
                fv.push(f.eval(&grid, &path));
            }
            let scale = q1[j1] * q2[j2] * rho(y1 - k.lo(a), a) * gauss_density(y2 - y1, b - a) * rho(k.hi(b) - y2, 1.0 - b);
            ratio.push(scale, w, fv);
        }
    }
    ratio.estimate()
}

fn house_grid(set: &TableSettings) -> TimeGrid {
    TimeGrid::unit(set.steps.max(4))
}

/// E[f(H_μ)] from the house-moving ensemble against the spliced construction
/// at each split time. Passes iff every spliced estimate is within 3 combined
/// SE of the direct one and the spliced estimates agree pairwise.
#[allow(clippy::too_many_arguments)]
pub fn check_decomposition(
    d: &DriftModel,
    k: &Corridor,
    splits: &[f64],
    f: &Functional,
    paths: usize,
    set: &TableSettings,
    stream: RngStream,
) -> Result<TestReport> {
    let clock = Instant::now();
    if splits.is_empty() {
        return Err(Error::Argument("decomposition needs at least one split time".into()));
    }
    let grid = house_grid(set);
    let (l, ess) = left_side(d, k, grid, f, paths, stream.labeled("house-moving"))?;
    let rs = splits
        .iter()
        .enumerate()
        .map(|(i, &t)| spliced_one(d, k, grid, t, f, set, stream.labeled("spliced").substream(i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut ok = true;
    let mut r = TestReport::new(format!("decomposition_{}", f.label()), stream.seed).stat("direct", l.value).stat("direct_se", l.std_err).stat("direct_ess", ess);
    for (t, e) in splits.iter().zip(&rs) {
        let z = (l.value - e.value) / combined(l.std_err, e.std_err).max(f64::MIN_POSITIVE);
        ok &= z.abs() <= 3.0 || l.value == e.value;
        r = r.stat(format!("spliced_t{t:.4}"), e.value).stat(format!("spliced_t{t:.4}_se"), e.std_err).stat(format!("diff_in_se_t{t:.4}"), z);
    }
    for i in 0..rs.len() {
        for j in i + 1..rs.len() {
            let diff = rs[i].value - rs[j].value;
            let z = diff / combined(rs[i].std_err, rs[j].std_err).max(f64::MIN_POSITIVE);
            ok &= z.abs() <= 3.0 || diff == 0.0;
            r = r.stat(format!("split_diff_in_se_{i}_{j}"), z);
        }
    }
    let mut r = r
        .threshold("se_multiple", 3.0)
        .samples("house_moving_paths", paths)
        .samples("pieces_per_node", set.paths)
        .samples("nodes", set.nodes)
        .verdict(Verdict::from_bool(ok));
    r.runtime = clock.elapsed();
    Ok(r)
}

/// Two-split variant: lower piece ⊕ interior bridge ⊕ upper piece.
pub fn check_decomposition2(
    d: &DriftModel,
    k: &Corridor,
    splits: (f64, f64),
    f: &Functional,
    paths: usize,
    set: &TableSettings,
    stream: RngStream,
) -> Result<TestReport> {
    let clock = Instant::now();
    let grid = house_grid(set);
    let (l, ess) = left_side(d, k, grid, f, paths, stream.labeled("house-moving"))?;
    let e = spliced_two(d, k, grid, splits, f, set, stream.labeled("spliced-two"))?;
    let z = (l.value - e.value) / combined(l.std_err, e.std_err).max(f64::MIN_POSITIVE);
    let mut r = TestReport::new(format!("decomposition2_{}", f.label()), stream.seed)
        .stat("direct", l.value)
        .stat("direct_se", l.std_err)
        .stat("direct_ess", ess)
        .stat("spliced", e.value)
        .stat("spliced_se", e.std_err)
        .stat("diff_in_se", z)
        .threshold("se_multiple", 3.0)
        .samples("house_moving_paths", paths)
        .samples("pieces_per_node_pair", set.paths)
        .samples("nodes_per_split", set.nodes)
        .verdict(Verdict::from_bool(z.abs() <= 3.0 || l.value == e.value));
    r.runtime = clock.elapsed();
    Ok(r)
}
