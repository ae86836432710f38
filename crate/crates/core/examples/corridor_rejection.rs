//! Rejection sampling of Brownian bridges in a widened corridor, with and
//! without the grid crossing correction.
//!
//! ```text
//! cargo run --release --example corridor_rejection
//! ```

use housemove::conditioned::{Proposal, RejectionSampler};
use housemove::corridor::{Corridor, Curve, TimeGrid};
use housemove::rng::RngStream;

fn main() -> housemove::error::Result<()> {
    let k = Corridor::new(Curve::linear(0.0, 0.2), Curve::constant(1.0), 0.0, 1.0)?;
    let grid = TimeGrid::unit(256);
    let stream = RngStream::root(5);
    println!("{:>8} {:>12} {:>12}", "eps", "nodes only", "corrected");
    for eps in [0.2, 0.1, 0.05] {
        let mut row = Vec::new();
        for corrected in [false, true] {
            let s = RejectionSampler::new(grid, Proposal::Bridge { a: 0.0, b: 1.0 }, &k, (eps, eps), corrected, 10_000_000)?;
            let trials = s.acceptance_trials(stream.labeled("trials"), 20_000);
            row.push(trials.iter().filter(|&&a| a).count() as f64 / trials.len() as f64);
        }
        println!("{eps:>8} {:>12.4} {:>12.4}", row[0], row[1]);
    }
    let s = RejectionSampler::new(grid, Proposal::Bridge { a: 0.0, b: 1.0 }, &k, (0.05, 0.05), true, 10_000_000)?;
    let (path, stats) = s.sample(stream.labeled("one"))?;
    println!("one accepted path after {} attempts, value at 1/2 = {:.4}", stats.attempts, path.value_at(0.5));
    Ok(())
}
