//! The house-moving constant C = (π n₁(b)/2) lim P(W^{0→b} ∈ K(ε)) / (η⁻η⁺).

use super::pieces::{housemoving_stats, TableSettings};
use super::Estimate;
use crate::conditioned::{smc_corridor_sample, BoundaryCase, EpsilonSchedule, Record};
use crate::corridor::{Corridor, TimeGrid};
use crate::drift::DriftModel;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::special::gauss_density;
use crate::stats::{mean_se, weighted_poly_fit};
use std::f64::consts::PI;

/// Polynomial extrapolation in ε over the finest levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CFit {
    pub degree: usize,
    pub levels_used: usize,
}

impl Default for CFit {
    fn default() -> Self {
        Self { degree: 2, levels_used: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CLevel {
    pub eps: f64,
    pub margins: (f64, f64),
    /// P(bridge stays in the widened corridor).
    pub probability: Estimate,
    /// probability / (η⁻η⁺).
    pub ratio: Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CEstimate {
    pub value: f64,
    pub std_err: f64,
    pub levels: Vec<CLevel>,
    pub fit: CFit,
    /// Fitted polynomial coefficients of the ratio in ε.
    pub coeffs: Vec<f64>,
}

impl CEstimate {
    pub fn estimate(&self) -> Estimate {
        Estimate::new(self.value, self.std_err)
    }
}

/// Schedule route: each level's probability is the mean of `replicates`
/// independent SMC normalizer estimates with `particles` particles.
pub fn estimate_c_constant(
    k: &Corridor,
    schedule: &EpsilonSchedule,
    grid: &TimeGrid,
    particles: usize,
    replicates: usize,
    fit: CFit,
    stream: RngStream,
) -> Result<CEstimate> {
    let b = k.housemoving_endpoint()?;
    schedule.validate()?;
    if replicates < 2 {
        return Err(Error::Argument("C estimation needs at least two replicates per level".into()));
    }
    if fit.levels_used <= fit.degree || fit.levels_used > schedule.levels {
        return Err(Error::Argument(format!(
            "fit of degree {} over {} of {} levels is not identifiable",
            fit.degree, fit.levels_used, schedule.levels
        )));
    }
    let mut levels = Vec::with_capacity(schedule.levels);
    for (lvl, eps) in schedule.epsilons().into_iter().enumerate() {
        let margins = schedule.margins(eps);
        let s = stream.substream(lvl as u64);
        let ps = (0..replicates)
            .map(|r| {
                smc_corridor_sample(s.substream(r as u64), grid, None, k, margins, &BoundaryCase::housemoving(), particles, 0.5, &Record::Nodes(vec![]))
                    .map(|o| o.log_normalizer.exp())
            })
            .collect::<Result<Vec<f64>>>()?;
        let (p, se) = mean_se(&ps);
        let denom = margins.0 * margins.1;
        levels.push(CLevel { eps, margins, probability: Estimate::new(p, se), ratio: Estimate::new(p / denom, se / denom) });
    }
    let finest = levels.last().unwrap();
    if !(finest.probability.value > 0.0) {
        return Err(Error::starvation("C constant", format!("no corridor survivors at ε = {:.3e}; increase particles", finest.eps)));
    }
    let used = &levels[levels.len() - fit.levels_used..];
    let x: Vec<f64> = used.iter().map(|l| l.eps).collect();
    let y: Vec<f64> = used.iter().map(|l| l.ratio.value).collect();
    let se: Vec<f64> = used.iter().map(|l| l.ratio.std_err.max(1e-12 * l.ratio.value)).collect();
    let (coeffs, ses) = weighted_poly_fit(&x, &y, &se, fit.degree)?;
    let scale = PI * gauss_density(b, 1.0) / 2.0;
    Ok(CEstimate { value: coeffs[0] * scale, std_err: ses[0] * scale, levels, fit, coeffs })
}

/// Normalization route: the mean Brownian weight of the ε = 0 house-moving
/// importance sampler, divided by √(τ(1−τ)).
pub fn estimate_c_normalization(k: &Corridor, set: &TableSettings, stream: RngStream) -> Result<Estimate> {
    Ok(housemoving_stats(k, &DriftModel::Zero, set, stream)?.base)
}

#[cfg(test)]
mod tests {
    use super::*;

    const C_FLAT: f64 = 0.222_993_193_380_316_87;

    #[test]
    fn schedule_route_matches_image_series() {
        let k = Corridor::flat(0.0, 1.0).unwrap();
        let sched = EpsilonSchedule::default_for(&k).with_levels(5);
        let c = estimate_c_constant(&k, &sched, &TimeGrid::unit(256), 2_000, 8, CFit::default(), RngStream::root(11)).unwrap();
        assert!(c.levels.iter().all(|l| l.ratio.value > 0.0));
        assert!((c.value - C_FLAT).abs() < 4.0 * c.std_err + 0.01, "C = {} ± {}", c.value, c.std_err);
    }

    #[test]
    fn normalization_route_matches_image_series() {
        let k = Corridor::flat(0.0, 1.0).unwrap();
        let set = TableSettings { steps: 512, paths: 20_000, ..Default::default() };
        let c = estimate_c_normalization(&k, &set, RngStream::root(12)).unwrap();
        assert!((c.value - C_FLAT).abs() < 4.0 * c.std_err + 2e-3, "C = {c:?}");
    }

    #[test]
    fn n1_factor_at_zero() {
        assert!((PI * gauss_density(0.0, 1.0) / 2.0 - 0.626_657).abs() < 1e-6);
    }
}
