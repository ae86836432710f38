//! Sequential Monte Carlo in a corridor too narrow for rejection: the
//! normalizer estimate against the eigenfunction series and the ESS trace.
//!
//! ```text
//! cargo run --release --example smc_tight_corridor
//! ```

use housemove::conditioned::{smc_corridor_sample, BoundaryCase, EndAnchor, Anchor, Record};
use housemove::corridor::{Corridor, TimeGrid};
use housemove::rng::RngStream;
use std::f64::consts::PI;

fn main() -> housemove::error::Result<()> {
    // Width 0.4 on [0, 1]: P(|W| < 0.2) ≈ (4/π) e^{−π²/(8·0.04)} ≈ 5e−14.
    let k = Corridor::flat(-0.2, 0.2)?;
    let grid = TimeGrid::unit(512);
    let case = BoundaryCase { start: Anchor::Interior(0.0), end: EndAnchor::Free };
    let out = smc_corridor_sample(RngStream::root(9), &grid, None, &k, (0.0, 0.0), &case, 5000, 0.5, &Record::times(&grid, &[0.5, 1.0]))?;
    let series: f64 = (0..30)
        .map(|n| {
            let m = (2 * n + 1) as f64;
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            4.0 / PI * sign / m * (-m * m * PI * PI / (8.0 * 0.04)).exp()
        })
        .sum();
    println!("ln P(stay in corridor): smc {:.4}, series {:.4}", out.log_normalizer, series.ln());
    println!("resampling events: {}", out.resample_count);
    let min = out.ess_trajectory.iter().copied().fold(f64::INFINITY, f64::min);
    println!("minimum ESS along the path: {min:.1} of 5000");
    println!("final ensemble ESS: {:.1}", out.ensemble.ess());
    Ok(())
}
