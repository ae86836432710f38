use super::pieces::{bridge_pieces, free_pieces, housemoving_stats, lower_pieces, meander_stats, upper_pieces, PieceStats, PieceTable, TableSettings};
use super::table::{kernel_grid, DensityEstimate, KernelTable};
use super::Estimate;
use crate::conditioned::{map_draws, InteriorSampler};
use crate::corridor::Corridor;
use crate::drift::DriftModel;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::special::gauss_density;

/// Meander end-point density at distance `u` from the wall after time `s`.
fn rho(u: f64, s: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    u / s * (-u * u / (2.0 * s)).exp()
}

fn q_up_table(k: &Corridor, t: f64, p: &PieceTable) -> Result<KernelTable> {
    let s = t - k.t_start();
    let lo = k.lo(t);
    let (v, se): (Vec<f64>, Vec<f64>) = p.y.iter().zip(&p.stats).map(|(&y, st)| { let r = rho(y - lo, s); (st.base.value * r, st.base.std_err * r) }).unzip();
    Ok(KernelTable::new("q_up", p.y.clone(), v, se, (lo, k.hi(t)))?.with_wall_values(Some(0.0), None))
}

fn q_down_table(k: &Corridor, t: f64, p: &PieceTable) -> Result<KernelTable> {
    let s = k.t_end() - t;
    let hi = k.hi(t);
    let (v, se): (Vec<f64>, Vec<f64>) = p.y.iter().zip(&p.stats).map(|(&y, st)| { let r = rho(hi - y, s); (st.base.value * r, st.base.std_err * r) }).unzip();
    Ok(KernelTable::new("q_down", p.y.clone(), v, se, (k.lo(t), hi))?.with_wall_values(None, Some(0.0)))
}

fn check_interior(k: &Corridor, t: f64, ys: &[f64]) -> Result<()> {
    if !(t > k.t_start() && t < k.t_end()) {
        return Err(Error::Domain(format!("time {t} must lie strictly inside the corridor domain")));
    }
    if let Some(y) = ys.iter().find(|&&y| !(y > k.lo(t) && y < k.hi(t))) {
        return Err(Error::Domain(format!("y = {y} not strictly inside the corridor at t = {t}")));
    }
    Ok(())
}

/// q↑ on `ys` at time t: Brownian weights of BES(3) bridges from the lower
/// wall times the meander end-point density.
pub fn estimate_q_up(k: &Corridor, t: f64, ys: &[f64], set: &TableSettings, stream: RngStream) -> Result<KernelTable> {
    check_interior(k, t, ys)?;
    q_up_table(k, t, &lower_pieces(k, &DriftModel::Zero, t, ys, set, stream)?)
}

/// q↓ on `ys` at time t, through the mirrored corridor.
pub fn estimate_q_down(k: &Corridor, t: f64, ys: &[f64], set: &TableSettings, stream: RngStream) -> Result<KernelTable> {
    check_interior(k, t, ys)?;
    q_down_table(k, t, &upper_pieces(k, &DriftModel::Zero, t, ys, set, stream)?)
}

fn p_table(k: &Corridor, (t1, y1): (f64, f64), t2: f64, p: &PieceTable) -> Result<KernelTable> {
    let var = t2 - t1;
    let (v, se): (Vec<f64>, Vec<f64>) = p
        .y
        .iter()
        .zip(&p.stats)
        .map(|(&y, st)| {
            let g = gauss_density(y - y1, var);
            (st.base.value * g, st.base.std_err * g)
        })
        .unzip();
    Ok(KernelTable::new("p", p.y.clone(), v, se, (k.lo(t2), k.hi(t2)))?.with_wall_values(Some(0.0), Some(0.0)))
}

/// p_{[t1,t2]}(y1, ·) on `ys`: survival probability of the Brownian bridge
/// y1 → y times the Gaussian transition density.
pub fn estimate_p_kernel(k: &Corridor, (t1, y1): (f64, f64), t2: f64, ys: &[f64], set: &TableSettings, stream: RngStream) -> Result<KernelTable> {
    if !(t1 >= k.t_start() && t2 > t1 && t2 <= k.t_end()) {
        return Err(Error::Domain(format!("need t_start ≤ t1 < t2 ≤ t_end, got {t1}, {t2}")));
    }
    if !(y1 > k.lo(t1) && y1 < k.hi(t1)) {
        return Err(Error::Domain(format!("y1 = {y1} not strictly inside the corridor at t = {t1}")));
    }
    p_table(k, (t1, y1), t2, &bridge_pieces(k, &DriftModel::Zero, (t1, y1), t2, ys, set, stream)?)
}

/// Histogram of surviving Brownian end points from y1: the sub-density
/// p_{[t1,t2]}(y1, ·) on `bins` bins. The histogram range is the corridor
/// slice at t2 clipped to y1 ± 8√(t2 − t1); `mass` is the survival probability.
pub fn estimate_p_histogram(
    k: &Corridor,
    (t1, y1): (f64, f64),
    t2: f64,
    bins: usize,
    set: &TableSettings,
    stream: RngStream,
) -> Result<DensityEstimate> {
    let sampler = InteriorSampler::new(k, set.grid(t1, t2)?, y1, None, DriftModel::Zero)?;
    let draws: Vec<(f64, f64)> = map_draws(&sampler, stream, set.paths, |p, d| (p[p.len() - 1], d.log_base.exp()));
    let sd = (t2 - t1).sqrt();
    let (a, b) = (k.lo(t2).max(y1 - 8.0 * sd), k.hi(t2).min(y1 + 8.0 * sd));
    let h = (b - a) / bins as f64;
    let n = draws.len() as f64;
    let (mut s1, mut s2) = (vec![0.0; bins], vec![0.0; bins]);
    for &(x, w) in &draws {
        if w > 0.0 && x >= a && x <= b {
            let i = (((x - a) / h) as usize).min(bins - 1);
            s1[i] += w;
            s2[i] += w * w;
        }
    }
    let values: Vec<f64> = s1.iter().map(|s| s / (n * h)).collect();
    let rel: Vec<f64> = (0..bins)
        .map(|i| {
            let m = s1[i] / n;
            if m == 0.0 {
                return 0.0;
            }
            ((s2[i] / n - m * m).max(0.0) / (n - 1.0)).sqrt() / m
        })
        .collect();
    let y: Vec<f64> = (0..bins).map(|i| a + (i as f64 + 0.5) * h).collect();
    let mut d = DensityEstimate::from_nodes(y, values, &rel, 0.0, (a, b))?;
    let total: f64 = draws.iter().map(|p| p.1).sum::<f64>() / n;
    let var = draws.iter().map(|p| (p.1 - total).powi(2)).sum::<f64>() / (n - 1.0);
    d.mass = total;
    d.mass_se = (var / n).sqrt();
    Ok(d)
}

fn check_same_grid(a: &[f64], b: &[f64]) -> Result<()> {
    if a != b {
        return Err(Error::Composition("component tables live on different y-grids".into()));
    }
    Ok(())
}

/// h(t, ·) = q↑ q↓ / (C √t √(1−t)) on the common grid of the two tables.
pub fn estimate_h(k: &Corridor, t: f64, c: Estimate, q_up: &KernelTable, q_down: &KernelTable) -> Result<DensityEstimate> {
    check_same_grid(&q_up.y, &q_down.y)?;
    let scale = 1.0 / (c.value * (t - k.t_start()).sqrt() * (k.t_end() - t).sqrt());
    let values: Vec<f64> = (0..q_up.len()).map(|i| q_up.values[i] * q_down.values[i] * scale).collect();
    let rel: Vec<f64> = (0..q_up.len()).map(|i| rel2(q_up.std_err[i], q_up.values[i], q_down.std_err[i], q_down.values[i])).collect();
    DensityEstimate::from_nodes(q_up.y.clone(), values, &rel, c.rel(), (k.lo(t), k.hi(t)))
}

fn rel(se: f64, v: f64) -> f64 {
    if se == 0.0 {
        0.0
    } else {
        se / v.abs()
    }
}

fn rel2(se1: f64, v1: f64, se2: f64, v2: f64) -> f64 {
    (rel(se1, v1).powi(2) + rel(se2, v2).powi(2)).sqrt()
}

/// h(t1, y1, t2, ·) = p(y1, ·) q↓(t2, ·)/√(1−t2) ÷ q↓(t1, y1)/√(1−t1).
pub fn estimate_h_transition(
    k: &Corridor,
    (t1, _y1): (f64, f64),
    t2: f64,
    p: &KernelTable,
    q_down_t2: &KernelTable,
    q_down_start: Estimate,
) -> Result<DensityEstimate> {
    check_same_grid(&p.y, &q_down_t2.y)?;
    let t_end = k.t_end();
    let scale = (t_end - t1).sqrt() / ((t_end - t2).sqrt() * q_down_start.value);
    let values: Vec<f64> = (0..p.len()).map(|i| p.values[i] * q_down_t2.values[i] * scale).collect();
    let rel: Vec<f64> = (0..p.len()).map(|i| rel2(p.std_err[i], p.values[i], q_down_t2.std_err[i], q_down_t2.values[i])).collect();
    DensityEstimate::from_nodes(p.y.clone(), values, &rel, q_down_start.rel(), (k.lo(t2), k.hi(t2)))
}

/// Shared ensembles for h(t, ·) and h_μ(t, ·) on a house-moving corridor.
#[derive(Debug, Clone)]
pub struct HouseMovingTables {
    pub t: f64,
    pub lower: PieceTable,
    pub upper: PieceTable,
    /// `base` is C, `zeta` is E[e^{−½N(H)}].
    pub housemoving: PieceStats,
    pub q_up: KernelTable,
    pub q_down: KernelTable,
    pub min_ess: f64,
}

impl HouseMovingTables {
    /// Tables on the default kernel grid.
    pub fn estimate(k: &Corridor, drift: &DriftModel, t: f64, set: &TableSettings, stream: RngStream) -> Result<Self> {
        Self::estimate_on(k, drift, t, &kernel_grid(k, t, set.nodes), set, stream)
    }

    pub fn estimate_on(k: &Corridor, drift: &DriftModel, t: f64, ys: &[f64], set: &TableSettings, stream: RngStream) -> Result<Self> {
        k.housemoving_endpoint()?;
        check_interior(k, t, ys)?;
        let lower = lower_pieces(k, drift, t, ys, set, stream.labeled("lower"))?;
        let upper = upper_pieces(k, drift, t, ys, set, stream.labeled("upper"))?;
        let housemoving = housemoving_stats(k, drift, set, stream.labeled("house-moving"))?;
        Ok(Self { t, q_up: q_up_table(k, t, &lower)?, q_down: q_down_table(k, t, &upper)?, lower, upper, housemoving, min_ess: set.min_ess })
    }

    pub fn c(&self) -> Estimate {
        self.housemoving.base
    }

    pub fn h(&self, k: &Corridor) -> Result<DensityEstimate> {
        estimate_h(k, self.t, self.c(), &self.q_up, &self.q_down)
    }

    /// ζ(t, y) = E[e^{−½N}(lower piece)] E[e^{−½N}(upper piece)] / E[e^{−½N(H)}].
    pub fn zeta(&self) -> Result<Vec<Estimate>> {
        self.lower.check_ess("lower piece", self.min_ess)?;
        self.upper.check_ess("upper piece", self.min_ess)?;
        self.housemoving.check_ess("house-moving", self.min_ess)?;
        Ok(estimate_zeta(&self.lower, &self.upper, self.housemoving.zeta))
    }

    pub fn h_mu(&self, k: &Corridor) -> Result<DensityEstimate> {
        let h = self.h(k)?;
        let z = self.zeta()?;
        let values: Vec<f64> = h.values.iter().zip(&z).map(|(v, z)| v * z.value).collect();
        let node_rel: Vec<f64> = (0..h.y.len())
            .map(|i| {
                let r = rel2(self.q_up.std_err[i], self.q_up.values[i], self.q_down.std_err[i], self.q_down.values[i]);
                (r * r + self.lower.stats[i].zeta.rel().powi(2) + self.upper.stats[i].zeta.rel().powi(2)).sqrt()
            })
            .collect();
        let common = (self.c().rel().powi(2) + self.housemoving.zeta.rel().powi(2)).sqrt();
        DensityEstimate::from_nodes(h.y, values, &node_rel, common, h.support)
    }
}

/// Node-wise ζ from piece tables and the house-moving denominator.
pub fn estimate_zeta(lower: &PieceTable, upper: &PieceTable, denominator: Estimate) -> Vec<Estimate> {
    lower
        .stats
        .iter()
        .zip(&upper.stats)
        .map(|(a, b)| {
            let v = a.zeta.value * b.zeta.value / denominator.value;
            let r = (a.zeta.rel().powi(2) + b.zeta.rel().powi(2) + denominator.rel().powi(2)).sqrt();
            Estimate::new(v, v * r)
        })
        .collect()
}

/// h_μ(t, ·) from freshly estimated tables.
pub fn estimate_h_mu(k: &Corridor, drift: &DriftModel, t: f64, set: &TableSettings, stream: RngStream) -> Result<DensityEstimate> {
    HouseMovingTables::estimate(k, drift, t, set, stream)?.h_mu(k)
}

/// Shared ensembles for h(t1, y1, t2, ·) and its drifted twin.
#[derive(Debug, Clone)]
pub struct TransitionTables {
    pub start: (f64, f64),
    pub t2: f64,
    pub bridge: PieceTable,
    pub upper: PieceTable,
    pub upper_start: PieceStats,
    pub p: KernelTable,
    pub q_down: KernelTable,
    pub q_down_start: Estimate,
    pub min_ess: f64,
}

impl TransitionTables {
    pub fn estimate(k: &Corridor, drift: &DriftModel, (t1, y1): (f64, f64), t2: f64, ys: &[f64], set: &TableSettings, stream: RngStream) -> Result<Self> {
        k.housemoving_endpoint()?;
        check_interior(k, t1, &[y1])?;
        check_interior(k, t2, ys)?;
        if t2 <= t1 {
            return Err(Error::Domain(format!("need t1 < t2, got {t1}, {t2}")));
        }
        let bridge = bridge_pieces(k, drift, (t1, y1), t2, ys, set, stream.labeled("bridge"))?;
        let upper = upper_pieces(k, drift, t2, ys, set, stream.labeled("upper"))?;
        let start = upper_pieces(k, drift, t1, &[y1], set, stream.labeled("upper-start"))?;
        let r = rho(k.hi(t1) - y1, k.t_end() - t1);
        let qs = start.stats[0].base.scale(r);
        Ok(Self {
            start: (t1, y1),
            t2,
            p: p_table(k, (t1, y1), t2, &bridge)?,
            q_down: q_down_table(k, t2, &upper)?,
            q_down_start: qs,
            upper_start: start.stats[0],
            bridge,
            upper,
            min_ess: set.min_ess,
        })
    }

    pub fn h(&self, k: &Corridor) -> Result<DensityEstimate> {
        estimate_h_transition(k, self.start, self.t2, &self.p, &self.q_down, self.q_down_start)
    }

    /// ζ(t1, y1, t2, y) = E[e^{−½N}(bridge)] E[e^{−½N}(upper at t2)] / E[e^{−½N}(upper at t1)].
    pub fn zeta(&self) -> Result<Vec<Estimate>> {
        self.bridge.check_ess("interior bridge", self.min_ess)?;
        self.upper.check_ess("upper piece", self.min_ess)?;
        self.upper_start.check_ess("upper piece at start", self.min_ess)?;
        Ok(estimate_zeta(&self.bridge, &self.upper, self.upper_start.zeta))
    }

    pub fn h_mu(&self, k: &Corridor) -> Result<DensityEstimate> {
        let h = self.h(k)?;
        let z = self.zeta()?;
        let values: Vec<f64> = h.values.iter().zip(&z).map(|(v, z)| v * z.value).collect();
        let node_rel: Vec<f64> = (0..h.y.len())
            .map(|i| {
                let r = rel2(self.p.std_err[i], self.p.values[i], self.q_down.std_err[i], self.q_down.values[i]);
                (r * r + self.bridge.stats[i].zeta.rel().powi(2) + self.upper.stats[i].zeta.rel().powi(2)).sqrt()
            })
            .collect();
        let common = (self.q_down_start.rel().powi(2) + self.upper_start.zeta.rel().powi(2)).sqrt();
        DensityEstimate::from_nodes(h.y, values, &node_rel, common, h.support)
    }
}

/// h_μ(t1, y1, t2, ·) on the default kernel grid at t2.
pub fn estimate_h_mu_transition(
    k: &Corridor,
    drift: &DriftModel,
    start: (f64, f64),
    t2: f64,
    set: &TableSettings,
    stream: RngStream,
) -> Result<DensityEstimate> {
    TransitionTables::estimate(k, drift, start, t2, &kernel_grid(k, t2, set.nodes), set, stream)?.h_mu(k)
}

/// Shared ensembles for the corridor-meander densities k(t, ·) and k_μ(t, ·)
/// on [t_start, t_end].
#[derive(Debug, Clone)]
pub struct MeanderTables {
    pub t: f64,
    pub t_end: f64,
    pub lower: PieceTable,
    pub free: PieceTable,
    pub meander: PieceStats,
    pub min_ess: f64,
}

impl MeanderTables {
    pub fn estimate(k: &Corridor, drift: &DriftModel, t: f64, t_end: f64, set: &TableSettings, stream: RngStream) -> Result<Self> {
        if !(t > k.t_start() && t < t_end && t_end <= k.t_end()) {
            return Err(Error::Domain(format!("need t_start < t < t_end ≤ corridor end, got t = {t}, t_end = {t_end}")));
        }
        let ys = kernel_grid(k, t, set.nodes);
        Ok(Self {
            t,
            t_end,
            lower: lower_pieces(k, drift, t, &ys, set, stream.labeled("lower"))?,
            free: free_pieces(k, drift, t, t_end, &ys, set, stream.labeled("free"))?,
            meander: meander_stats(k, drift, t_end, set, stream.labeled("meander"))?,
            min_ess: set.min_ess,
        })
    }

    /// k(t, y) = √((T−t₀)/(t−t₀)) q↑(y) P(BM from y survives on [t, T]) / M.
    pub fn k(&self, k: &Corridor) -> Result<DensityEstimate> {
        let q = q_up_table(k, self.t, &self.lower)?;
        let t0 = k.t_start();
        let scale = ((self.t_end - t0) / (self.t - t0)).sqrt() / self.meander.base.value;
        let values: Vec<f64> = (0..q.len()).map(|i| q.values[i] * self.free.stats[i].base.value * scale).collect();
        let rel: Vec<f64> = (0..q.len())
            .map(|i| rel2(q.std_err[i], q.values[i], self.free.stats[i].base.std_err, self.free.stats[i].base.value))
            .collect();
        DensityEstimate::from_nodes(q.y, values, &rel, self.meander.base.rel(), (k.lo(self.t), k.hi(self.t)))
    }

    pub fn k_mu(&self, k: &Corridor) -> Result<DensityEstimate> {
        self.lower.check_ess("lower piece", self.min_ess)?;
        self.free.check_ess("free piece", self.min_ess)?;
        self.meander.check_ess("meander", self.min_ess)?;
        let base = self.k(k)?;
        let z = estimate_zeta(&self.lower, &self.free, self.meander.zeta);
        let values: Vec<f64> = base.values.iter().zip(&z).map(|(v, z)| v * z.value).collect();
        let node_rel: Vec<f64> = (0..base.y.len())
            .map(|i| {
                let r = if base.values[i] > 0.0 { (base.std_err[i] / base.values[i]).powi(2) - base.common_rel.powi(2) } else { 0.0 };
                (r.max(0.0) + self.lower.stats[i].zeta.rel().powi(2) + self.free.stats[i].zeta.rel().powi(2)).sqrt()
            })
            .collect();
        let common = (base.common_rel.powi(2) + self.meander.zeta.rel().powi(2)).sqrt();
        DensityEstimate::from_nodes(base.y, values, &node_rel, common, base.support)
    }
}

pub fn estimate_k(k: &Corridor, t: f64, t_end: f64, set: &TableSettings, stream: RngStream) -> Result<DensityEstimate> {
    MeanderTables::estimate(k, &DriftModel::Zero, t, t_end, set, stream)?.k(k)
}

pub fn estimate_k_mu(k: &Corridor, drift: &DriftModel, t: f64, t_end: f64, set: &TableSettings, stream: RngStream) -> Result<DensityEstimate> {
    MeanderTables::estimate(k, drift, t, t_end, set, stream)?.k_mu(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> TableSettings {
        TableSettings { steps: 256, paths: 4_000, nodes: 24, min_ess: 10.0 }
    }

    #[test]
    fn q_up_far_walls_is_rayleigh() {
        let k = Corridor::flat(0.0, 1e6).unwrap();
        let ys = [0.3, 0.7, 1.2];
        let q = estimate_q_up(&k, 0.5, &ys, &small(), RngStream::root(1)).unwrap();
        for (i, &y) in ys.iter().enumerate() {
            assert!((q.values[i] - rho(y, 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn p_kernel_without_walls_is_gaussian() {
        let k = Corridor::flat(-1e6, 1e6).unwrap();
        let ys = [-0.5, 0.0, 0.8];
        let p = estimate_p_kernel(&k, (0.0, 0.1), 0.5, &ys, &small(), RngStream::root(1)).unwrap();
        for (i, &y) in ys.iter().enumerate() {
            assert!((p.values[i] - gauss_density(y - 0.1, 0.5)).abs() < 1e-12);
        }
        let hist = estimate_p_histogram(&k, (0.0, 0.1), 0.5, 128, &small(), RngStream::root(2)).unwrap();
        assert_eq!(hist.mass, 1.0);
    }

    #[test]
    fn h_integrates_to_one_and_mu_zero_is_identical() {
        let k = Corridor::flat(0.0, 1.0).unwrap();
        let tabs = HouseMovingTables::estimate(&k, &DriftModel::Zero, 0.5, &small(), RngStream::root(3)).unwrap();
        let h = tabs.h(&k).unwrap();
        assert!((h.mass - 1.0).abs() < 5.0 * h.mass_se + 0.01, "mass {} ± {}", h.mass, h.mass_se);
        assert_eq!(tabs.h_mu(&k).unwrap().values, h.values);
    }

    #[test]
    fn constant_drift_zeta_telescopes() {
        let k = Corridor::flat(0.0, 1.0).unwrap();
        let set = TableSettings { paths: 300, ..small() };
        let tabs = HouseMovingTables::estimate(&k, &DriftModel::Constant { c: 1.5 }, 0.5, &set, RngStream::root(3)).unwrap();
        for z in tabs.zeta().unwrap() {
            assert!((z.value - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn meander_k_integrates_to_one() {
        let k = Corridor::flat(0.0, 1.0).unwrap();
        let d = MeanderTables::estimate(&k, &DriftModel::Zero, 0.4, 1.0, &small(), RngStream::root(4)).unwrap().k(&k).unwrap();
        assert!((d.mass - 1.0).abs() < 5.0 * d.mass_se + 0.01, "mass {} ± {}", d.mass, d.mass_se);
    }
}
