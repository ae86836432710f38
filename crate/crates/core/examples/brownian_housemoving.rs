//! Brownian house-moving in the flat corridor [0, 1]: the ε-schedule, the
//! weighted ε = 0 sampler, and the constant C against its series value.
//!
//! ```text
//! cargo run --release --example brownian_housemoving
//! ```

use housemove::conditioned::{sample_housemoving_bm, weighted_ensemble, EpsilonSchedule, HouseMovingSampler, LevelSampler, Record, RunSettings};
use housemove::corridor::{Corridor, TimeGrid};
use housemove::reweighting::{estimate_c_normalization, snis, snis_values, TableSettings};
use housemove::rng::RngStream;
use std::f64::consts::PI;

fn main() -> housemove::error::Result<()> {
    let k = Corridor::flat(0.0, 1.0)?;
    let grid = TimeGrid::unit(256);
    let root = RngStream::root(1);

    let schedule = EpsilonSchedule::default_for(&k);
    let settings = RunSettings::new(4000, LevelSampler::Smc { resample_threshold: 0.5 }).probes(vec![0.25, 0.5, 0.75]);
    let run = sample_housemoving_bm(root.labeled("schedule"), &grid, &k, &schedule, &settings)?;
    println!("eps       E[H(1/2)]   ESS");
    for l in &run.levels {
        let s = snis_values(l.ensemble.log_weights(), &l.ensemble.column_at(0.5)?)?;
        println!("{:<9.4} {:.4}      {:.0}", l.eps, s.estimate, l.ensemble.ess());
    }
    for w in &run.warnings {
        println!("{w}");
    }

    let hm = HouseMovingSampler::new(&k, grid, 0.5, Default::default())?;
    let e = weighted_ensemble(&hm, root.labeled("limit"), 20_000, &Record::Full)?;
    let s = snis(&e, |row| row[128])?;
    println!("eps = 0 sampler: E[H(1/2)] = {:.4} ± {:.4} (symmetry: 0.5)", s.estimate, s.std_err);

    let c = estimate_c_normalization(&k, &TableSettings { paths: 40_000, ..TableSettings::default() }, root.labeled("c"))?;
    let series: f64 = 2.0 * PI
        * (0..40)
            .map(|j| {
                let m = (2 * j + 1) as f64;
                (m * m - 1.0) * (-m * m / 2.0).exp() / (2.0 * PI).sqrt()
            })
            .sum::<f64>();
    println!("C = {:.4} ± {:.4} (series {series:.4})", c.value, c.std_err);
    Ok(())
}
