//! Diffusion house-moving for dX = −X dt + dW between a cosine floor and a
//! flat ceiling: SMC at the finest ε against the reweighted ε = 0 sampler.
//!
//! ```text
//! cargo run --release --example diffusion_housemoving
//! ```

use housemove::conditioned::{sample_boundary_case, weighted_ensemble, BoundaryCase, EpsilonSchedule, HouseMovingSampler, LevelSampler, Record, RunSettings};
use housemove::corridor::{Corridor, Curve, TimeGrid};
use housemove::drift::DriftModel;
use housemove::reweighting::snis_values;
use housemove::rng::RngStream;

fn main() -> housemove::error::Result<()> {
    let floor = Curve::Cosine { amplitude: 0.15, frequency: 1.0, phase: 0.0, offset: -0.15 };
    let k = Corridor::new(floor, Curve::constant(1.0), 0.0, 1.0)?;
    let drift = DriftModel::Linear { a: 0.0, b: -1.0 };
    let grid = TimeGrid::unit(256);
    let root = RngStream::root(17);

    let mut settings = RunSettings::new(5000, LevelSampler::Smc { resample_threshold: 0.5 }).probes(vec![0.25, 0.5, 0.75]);
    settings.drift = Some(drift.clone());
    let run = sample_boundary_case(root.labeled("smc"), &grid, &k, &BoundaryCase::housemoving(), &EpsilonSchedule::default_for(&k), &settings)?;
    let hm = HouseMovingSampler::new(&k, grid, 0.5, drift)?;
    let limit = weighted_ensemble(&hm, root.labeled("limit"), 20_000, &Record::times(&grid, &[0.25, 0.5, 0.75]))?;

    println!("t      smc (finest eps)    eps = 0 reweighted");
    for t in [0.25, 0.5, 0.75] {
        let f = run.finest();
        let a = snis_values(f.ensemble.log_weights(), &f.ensemble.column_at(t)?)?;
        let b = snis_values(limit.log_weights(), &limit.column_at(t)?)?;
        println!("{t:<6} {:.4} ± {:.4}     {:.4} ± {:.4}", a.estimate, a.std_err, b.estimate, b.std_err);
    }
    println!("finest eps = {:.4}, limit ESS = {:.0}", run.finest().eps, limit.ess());
    Ok(())
}
