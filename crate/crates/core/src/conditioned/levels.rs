//! ε-schedule runs: one conditioned ensemble per margin level plus
//! level-to-level convergence diagnostics.

use super::ensemble::{Record, WeightedEnsemble};
use super::rejection::{Proposal, RejectionSampler};
use super::schedule::{Anchor, BoundaryCase, EndAnchor, EpsilonSchedule, MarginRule};
use super::smc::smc_corridor_sample;
use crate::corridor::{Corridor, TimeGrid};
use crate::drift::DriftModel;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::stats::weighted_ks;

/// Sampler used at every level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevelSampler {
    Rejection { max_attempts: u64 },
    Smc { resample_threshold: f64 },
}

/// One level of a schedule run.
#[derive(Debug, Clone)]
pub struct LevelEnsemble {
    pub eps: f64,
    pub margins: (f64, f64),
    pub ensemble: WeightedEnsemble,
    /// Rejection acceptance rate, when rejection was used.
    pub acceptance_rate: Option<f64>,
    /// SMC estimate of ln P(path stays in the widened corridor).
    pub log_normalizer: Option<f64>,
    pub min_ess: Option<f64>,
}

/// Per-level ensembles and KS distances between consecutive levels.
#[derive(Debug, Clone)]
pub struct ScheduleRun {
    pub case: BoundaryCase,
    pub levels: Vec<LevelEnsemble>,
    pub probe_times: Vec<f64>,
    /// `ks_by_level[k][j]`: KS distance between levels k and k+1 at probe j.
    pub ks_by_level: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl ScheduleRun {
    pub fn finest(&self) -> &LevelEnsemble {
        self.levels.last().expect("at least one level")
    }
}

/// Settings shared by all schedule runs.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub paths: usize,
    pub sampler: LevelSampler,
    pub record: Record,
    pub probe_times: Vec<f64>,
    pub drift: Option<DriftModel>,
}

impl RunSettings {
    pub fn new(paths: usize, sampler: LevelSampler) -> Self {
        Self { paths, sampler, record: Record::Nodes(vec![]), probe_times: vec![0.25, 0.5, 0.75], drift: None }
    }

    pub fn record(mut self, record: Record) -> Self {
        self.record = record;
        self
    }

    pub fn probes(mut self, times: Vec<f64>) -> Self {
        self.probe_times = times;
        self
    }
}

/// ε-schedule ensembles for any anchor combination.
pub fn sample_boundary_case(
    rng: RngStream,
    grid: &TimeGrid,
    k: &Corridor,
    case: &BoundaryCase,
    schedule: &EpsilonSchedule,
    settings: &RunSettings,
) -> Result<ScheduleRun> {
    schedule.validate()?;
    k.check_grid(grid)?;
    case.validate(k, grid.t_start(), grid.t_end())?;
    let probe_nodes: Vec<usize> = settings
        .probe_times
        .iter()
        .map(|&t| grid.index_of(t).ok_or_else(|| Error::Argument(format!("probe time {t} is not a grid node"))))
        .collect::<Result<_>>()?;
    let record = settings.record.with_nodes(&probe_nodes);
    let drift = settings.drift.as_ref().filter(|d| !d.is_zero());
    if drift.is_some() && matches!(settings.sampler, LevelSampler::Rejection { .. }) {
        return Err(Error::Argument("rejection levels sample Brownian laws; use SMC for a drift".into()));
    }

    // Interior anchors need no widening: a single level with zero margins.
    let levels: Vec<(f64, (f64, f64))> = if case.touches_boundary() {
        schedule.epsilons().into_iter().map(|e| (e, schedule.margins(e))).collect()
    } else {
        vec![(0.0, (0.0, 0.0))]
    };

    let x0 = case.start_value(k, grid.t_start());
    let end = case.end_value(k, grid.t_end());
    let mut out = Vec::with_capacity(levels.len());
    for (lvl, &(eps, margins)) in levels.iter().enumerate() {
        let stream = rng.substream(lvl as u64);
        let level = match settings.sampler {
            LevelSampler::Rejection { max_attempts } => {
                let proposal = match end {
                    Some(b) => Proposal::Bridge { a: x0, b },
                    None => Proposal::Brownian { a: x0 },
                };
                let s = RejectionSampler::new(*grid, proposal, k, margins, true, max_attempts)?;
                let (ensemble, stats) = s.ensemble(stream, settings.paths, &record)?;
                LevelEnsemble { eps, margins, ensemble, acceptance_rate: Some(stats.rate()), log_normalizer: None, min_ess: None }
            }
            LevelSampler::Smc { resample_threshold } => {
                let o = smc_corridor_sample(stream, grid, drift, k, margins, case, settings.paths, resample_threshold, &record)?;
                let min_ess = o.ess_trajectory.iter().copied().fold(f64::INFINITY, f64::min);
                LevelEnsemble {
                    eps,
                    margins,
                    ensemble: o.ensemble,
                    acceptance_rate: None,
                    log_normalizer: Some(o.log_normalizer),
                    min_ess: Some(min_ess),
                }
            }
        };
        out.push(level);
    }

    let mut ks_by_level = Vec::new();
    let mut warnings = Vec::new();
    for pair in out.windows(2) {
        let mut row = Vec::new();
        for &node in &probe_nodes {
            let a = pair[0].ensemble.column(node).expect("probe recorded");
            let b = pair[1].ensemble.column(node).expect("probe recorded");
            let (d, _) = weighted_ks(&a, pair[0].ensemble.log_weights(), &b, pair[1].ensemble.log_weights())?;
            row.push(d);
        }
        ks_by_level.push(row);
    }
    // KS distances should shrink along the schedule; growth beyond the
    // sampling noise of two independent ensembles is flagged.
    if ks_by_level.len() >= 2 {
        let noise = 2.0 * 1.36 * (2.0 / out.last().unwrap().ensemble.ess().max(1.0)).sqrt();
        for (j, t) in settings.probe_times.iter().enumerate() {
            for k2 in 1..ks_by_level.len() {
                if ks_by_level[k2][j] > ks_by_level[k2 - 1][j] + noise {
                    warnings.push(format!(
                        "convergence warning: KS distance at t = {t} grew from {:.4} to {:.4} between level pairs {} and {}",
                        ks_by_level[k2 - 1][j],
                        ks_by_level[k2][j],
                        k2 - 1,
                        k2
                    ));
                }
            }
        }
    }
    Ok(ScheduleRun { case: *case, levels: out, probe_times: settings.probe_times.clone(), ks_by_level, warnings })
}

/// Brownian house-moving on [0, 1]: bridge 0 → b = g⁺(1) in widened corridors.
pub fn sample_housemoving_bm(
    rng: RngStream,
    grid: &TimeGrid,
    k: &Corridor,
    schedule: &EpsilonSchedule,
    settings: &RunSettings,
) -> Result<ScheduleRun> {
    k.housemoving_endpoint()?;
    let mut s = settings.clone();
    s.drift = None;
    sample_boundary_case(rng, grid, k, &BoundaryCase::housemoving(), schedule, &s)
}

/// Brownian paths from `start` with free end, conditioned on the corridor.
/// With `symmetric = false` an on-boundary start uses margins (η⁻(ε), 0).
pub fn sample_corridor_meander_bm(
    rng: RngStream,
    grid: &TimeGrid,
    k: &Corridor,
    start: Anchor,
    schedule: &EpsilonSchedule,
    symmetric: bool,
    settings: &RunSettings,
) -> Result<ScheduleRun> {
    let mut sched = schedule.clone();
    if !symmetric {
        sched.eta_plus = MarginRule::Zero;
    }
    let mut s = settings.clone();
    s.drift = None;
    sample_boundary_case(rng, grid, k, &BoundaryCase { start, end: EndAnchor::Free }, &sched, &s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_case_is_single_rejection_level() {
        let k = Corridor::flat(0.0, 1.0).unwrap();
        let g = TimeGrid::unit(64);
        let case = BoundaryCase { start: Anchor::Interior(0.5), end: EndAnchor::Interior(0.4) };
        let sched = EpsilonSchedule::default_for(&k);
        let settings = RunSettings::new(100, LevelSampler::Rejection { max_attempts: 10_000 }).record(Record::Full);
        let run = sample_boundary_case(RngStream::root(5), &g, &k, &case, &sched, &settings).unwrap();
        assert_eq!(run.levels.len(), 1);
        let direct = RejectionSampler::new(g, Proposal::Bridge { a: 0.5, b: 0.4 }, &k, (0.0, 0.0), true, 10_000)
            .unwrap()
            .ensemble(RngStream::root(5).substream(0), 100, &Record::Full)
            .unwrap()
            .0;
        assert_eq!(run.levels[0].ensemble, direct);
    }

    #[test]
    fn housemoving_levels_are_contained() {
        let k = Corridor::flat(0.0, 1.0).unwrap();
        let g = TimeGrid::unit(128);
        let sched = EpsilonSchedule::default_for(&k).with_levels(3);
        let settings = RunSettings::new(300, LevelSampler::Smc { resample_threshold: 0.5 }).record(Record::Full);
        let run = sample_housemoving_bm(RngStream::root(2), &g, &k, &sched, &settings).unwrap();
        assert_eq!(run.levels.len(), 3);
        assert_eq!(run.ks_by_level.len(), 2);
        for lvl in &run.levels {
            for i in 0..lvl.ensemble.len() {
                let p = lvl.ensemble.path(i).unwrap();
                assert!(k.contains(&p, lvl.margins.0, lvl.margins.1));
                assert_eq!((p.start(), p.end()), (0.0, 1.0));
            }
        }
    }
}
