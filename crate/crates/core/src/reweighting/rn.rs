//! Radon–Nikodym derivatives of π_{[0,t]}∘H_μ, evaluated from plug-in tables.

use super::pieces::{housemoving_stats, meander_stats, upper_pieces, PieceStats, TableSettings};
use super::table::{kernel_grid, KernelTable};
use super::{logweight_bridge, Estimate};
use crate::corridor::{Corridor, SamplePath};
use crate::conditioned::log_nocross;
use crate::drift::{CameronMartin, DriftModel};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use std::f64::consts::PI;

/// A derivative value with the relative error propagated from the tables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RnValue {
    pub value: f64,
    pub log_value: f64,
    pub rel_se: f64,
    /// w(t) sits on g⁻(t), where the formula divides by zero; `value` is +∞.
    pub singular: bool,
}

impl RnValue {
    fn zero() -> Self {
        Self { value: 0.0, log_value: f64::NEG_INFINITY, rel_se: 0.0, singular: false }
    }

    fn singular() -> Self {
        Self { value: f64::INFINITY, log_value: f64::INFINITY, rel_se: f64::NAN, singular: true }
    }

    fn from_log(log_value: f64, rel_se: f64) -> Self {
        Self { value: log_value.exp(), log_value, rel_se, singular: false }
    }
}

/// Tables for the derivatives at a fixed time t.
#[derive(Debug, Clone)]
pub struct RnTables {
    pub t: f64,
    pub c: Estimate,
    /// E[e^{−½N(H)}].
    pub e_h: Estimate,
    pub q_down: KernelTable,
    /// E[e^{−½N}] of the upper piece from y to b.
    pub inner_down: KernelTable,
    /// Corridor meander on [0, t]: `base` = E[Z̃⁻¹(W⁺|K⁻)]·P(W⁺ ∈ K⁻), `zeta` = E[e^{G(end) − ½N}].
    pub meander: PieceStats,
    /// An independent replicate of `meander`, used by the meander-to-Bessel factor.
    pub meander_imhof: PieceStats,
    drift: DriftModel,
    corridor: Corridor,
}

impl RnTables {
    pub fn estimate(k: &Corridor, drift: &DriftModel, t: f64, set: &TableSettings, stream: RngStream) -> Result<Self> {
        k.housemoving_endpoint()?;
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::Domain(format!("time {t} must lie in (0, 1)")));
        }
        let ys = kernel_grid(k, t, set.nodes);
        let up = upper_pieces(k, drift, t, &ys, set, stream.labeled("upper"))?;
        let support = (k.lo(t), k.hi(t));
        let s = t.min(1.0);
        let hi = k.hi(t);
        let qv: Vec<(f64, f64)> = ys
            .iter()
            .zip(&up.stats)
            .map(|(&y, st)| {
                let d = hi - y;
                let r = d / (1.0 - s) * (-d * d / (2.0 * (1.0 - s))).exp();
                (st.base.value * r, st.base.std_err * r)
            })
            .collect();
        let q_down = KernelTable::new("q_down", ys.clone(), qv.iter().map(|p| p.0).collect(), qv.iter().map(|p| p.1).collect(), support)?
            .with_wall_values(None, Some(0.0));
        let inner_down = KernelTable::new(
            "inner_down",
            ys.clone(),
            up.stats.iter().map(|s| s.zeta.value).collect(),
            up.stats.iter().map(|s| s.zeta.std_err).collect(),
            support,
        )?;
        let hm = housemoving_stats(k, drift, set, stream.labeled("house-moving"))?;
        Ok(Self {
            t,
            c: hm.base,
            e_h: hm.zeta,
            q_down,
            inner_down,
            meander: meander_stats(k, drift, t, set, stream.labeled("meander"))?,
            meander_imhof: meander_stats(k, drift, t, set, stream.labeled("meander-imhof"))?,
            drift: drift.clone(),
            corridor: k.clone(),
        })
    }

    fn check_path(&self, w: &SamplePath) -> Result<()> {
        let g = w.grid();
        if g.t_start() != self.corridor.t_start() || (g.t_end() - self.t).abs() > 1e-9 {
            return Err(Error::Domain(format!("path must live on [0, {}], got [{}, {}]", self.t, g.t_start(), g.t_end())));
        }
        Ok(())
    }

    fn below_upper(&self, w: &SamplePath) -> bool {
        let g = w.grid();
        w.values().iter().enumerate().all(|(i, &v)| v <= self.corridor.hi(g.time(i)))
    }

    /// ln P(the continuous path stays below g⁺ | its grid values): the
    /// one-sided bridge correction applied to 1_{K⁻(g⁺)} on a grid.
    fn log_upper_survival(&self, w: &SamplePath) -> f64 {
        let g = w.grid();
        let v = w.values();
        let gap = |i: usize| self.corridor.hi(g.time(i)) - v[i];
        (0..v.len() - 1).map(|i| log_nocross(gap(i), gap(i + 1), g.dt())).sum()
    }

    fn log_z(&self, w: &SamplePath) -> f64 {
        CameronMartin::new(self.corridor.lower(), w.grid()).log_z(w.values())
    }

    /// Density of π_{[0,t]}∘H_μ with respect to R + g⁻ (R a BES(3) process).
    pub fn rn_cor3(&self, w: &SamplePath) -> Result<RnValue> {
        self.check_path(w)?;
        let ls = self.log_upper_survival(w);
        if ls == f64::NEG_INFINITY {
            return Ok(RnValue::zero());
        }
        let y = w.end();
        let d = y - self.corridor.lo(self.t);
        if d <= 0.0 {
            return Ok(RnValue::singular());
        }
        let (q, q_se) = self.q_down.eval(y)?;
        if q <= 0.0 {
            return Ok(RnValue::zero());
        }
        let (z, z_se) = self.inner_down.eval(y)?;
        let log = 0.5 * (PI / 2.0).ln() + q.ln() - self.c.value.ln() - 0.5 * (1.0 - self.t).ln() - d.ln() - self.log_z(w) + z.ln()
            - self.e_h.value.ln()
            + logweight_bridge(&self.drift, w)
            + ls;
        let rel = ((q_se / q).powi(2) + self.c.rel().powi(2) + (z_se / z).powi(2) + self.e_h.rel().powi(2)).sqrt();
        Ok(RnValue::from_log(log, rel))
    }

    /// Density of π_{[0,t]}∘H_μ with respect to the diffusion meander.
    pub fn rn_hm_mea(&self, w: &SamplePath) -> Result<RnValue> {
        self.check_path(w)?;
        if !self.below_upper(w) {
            return Ok(RnValue::zero());
        }
        let y = w.end();
        let (q, q_se) = self.q_down.eval(y)?;
        if q <= 0.0 {
            return Ok(RnValue::zero());
        }
        let (z, z_se) = self.inner_down.eval(y)?;
        let m = &self.meander;
        let log = -self.drift.big_g(y)? + m.zeta.value.ln() + z.ln() - self.e_h.value.ln() + m.base.value.ln() + q.ln()
            - self.c.value.ln()
            - 0.5 * self.t.ln()
            - 0.5 * (1.0 - self.t).ln();
        let rel = (m.zeta.rel().powi(2)
            + (z_se / z).powi(2)
            + self.e_h.rel().powi(2)
            + m.base.rel().powi(2)
            + (q_se / q).powi(2)
            + self.c.rel().powi(2))
        .sqrt();
        Ok(RnValue::from_log(log, rel))
    }

    /// Density of the diffusion meander with respect to R + g⁻, composed from
    /// the Girsanov factor, the Cameron–Martin ratio and the Imhof relation.
    pub fn meander_vs_bessel(&self, w: &SamplePath) -> Result<RnValue> {
        self.check_path(w)?;
        let ls = self.log_upper_survival(w);
        if ls == f64::NEG_INFINITY {
            return Ok(RnValue::zero());
        }
        let y = w.end();
        let d = y - self.corridor.lo(self.t);
        if d <= 0.0 {
            return Ok(RnValue::singular());
        }
        let m = &self.meander_imhof;
        let log = self.drift.big_g(y)? + logweight_bridge(&self.drift, w) - m.zeta.value.ln() - self.log_z(w) + 0.5 * (PI * self.t / 2.0).ln()
            - d.ln()
            - m.base.value.ln()
            + ls;
        Ok(RnValue::from_log(log, (m.zeta.rel().powi(2) + m.base.rel().powi(2)).sqrt()))
    }

    /// rn_hm_mea × meander_vs_bessel: a second route to `rn_cor3`.
    pub fn rn_chain(&self, w: &SamplePath) -> Result<RnValue> {
        let a = self.rn_hm_mea(w)?;
        let b = self.meander_vs_bessel(w)?;
        if b.singular {
            return Ok(b);
        }
        if a.value == 0.0 || b.value == 0.0 {
            return Ok(RnValue::zero());
        }
        Ok(RnValue::from_log(a.log_value + b.log_value, (a.rel_se.powi(2) + b.rel_se.powi(2)).sqrt()))
    }

    /// Relative standard error of rn_chain / rn_cor3, which depends on the path
    /// only through tables shared by both sides and cancels except for the
    /// two independent meander constants.
    pub fn chain_ratio_rel_se(&self) -> f64 {
        let a = (self.meander.zeta.rel().powi(2) + self.meander.base.rel().powi(2)).sqrt();
        let b = (self.meander_imhof.zeta.rel().powi(2) + self.meander_imhof.base.rel().powi(2)).sqrt();
        (a * a + b * b).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corridor::TimeGrid;
    use crate::exact::sample_bes3;

    fn tables(drift: DriftModel) -> (Corridor, RnTables) {
        let k = Corridor::flat(0.0, 1.0).unwrap();
        let set = TableSettings { steps: 256, paths: 3_000, nodes: 32, min_ess: 10.0 };
        let t = RnTables::estimate(&k, &drift, 0.5, &set, RngStream::root(9)).unwrap();
        (k, t)
    }

    #[test]
    fn exit_above_gives_zero_and_wall_is_singular() {
        let (_, t) = tables(DriftModel::Zero);
        let g = TimeGrid::new(0.0, 0.5, 128).unwrap();
        let above = SamplePath::from_fn(g, |s| 2.4 * s).unwrap();
        assert_eq!(t.rn_cor3(&above).unwrap().value, 0.0);
        let back = SamplePath::from_fn(g, |s| s * (0.5 - s)).unwrap();
        let v = t.rn_cor3(&back).unwrap();
        assert!(v.singular && v.value == f64::INFINITY);
    }

    #[test]
    fn brownian_reduction_and_chain_agree() {
        let (_, t) = tables(DriftModel::Zero);
        assert_eq!(t.e_h, Estimate::exact(1.0));
        assert!(t.inner_down.values.iter().all(|&v| v == 1.0));
        let g = TimeGrid::new(0.0, 0.5, 128).unwrap();
        for i in 0..20 {
            let w = sample_bes3(RngStream::root(100 + i), &g, 0.0).unwrap();
            let (a, b) = (t.rn_cor3(&w).unwrap(), t.rn_chain(&w).unwrap());
            if a.value == 0.0 {
                assert_eq!(b.value, 0.0);
                continue;
            }
            // Flat g⁻ ≡ 0, μ ≡ 0: √(π/2)·q↓(y)/(C√(1−t)·y) times the survival below g⁺.
            let y = w.end();
            let v = w.values();
            let surv: f64 = (0..v.len() - 1).map(|i| log_nocross(1.0 - v[i], 1.0 - v[i + 1], g.dt())).sum::<f64>().exp();
            let direct = (PI / 2.0).sqrt() * t.q_down.eval(y).unwrap().0 / (t.c.value * 0.5f64.sqrt() * y) * surv;
            assert!((a.value - direct).abs() < 1e-10 * direct);
            let ratio = b.value / a.value;
            let expect = t.meander.base.value / t.meander_imhof.base.value;
            assert!((ratio - expect).abs() < 1e-9);
        }
    }
}
