//! Exact samplers for the unconditioned building blocks, checked against
//! their closed-form moments.
//!
//! ```text
//! cargo run --release --example exact_samplers
//! ```

use housemove::corridor::TimeGrid;
use housemove::exact::{sample_bes3_bridge, sample_bridge, sample_meander};
use housemove::rng::RngStream;
use housemove::stats::mean_se;

fn main() -> housemove::error::Result<()> {
    let grid = TimeGrid::unit(256);
    let root = RngStream::root(2024);
    let n = 20_000u64;
    let mid = grid.index_of(0.5).unwrap();

    // Brownian bridge 0 → 1: X(½) ~ N(½, ¼).
    let xs: Vec<f64> = (0..n).map(|i| sample_bridge(root.labeled("bridge").substream(i), &grid, 0.0, 1.0).values()[mid]).collect();
    let (m, se) = mean_se(&xs);
    println!("bridge 0→1     E[X(1/2)] = {m:.4} ± {se:.4}  (exact 0.5)");

    // BES(3) bridge 0 → 0 is the norm of a 3-d Brownian bridge: E[e(½)²] = 3·¼.
    let ys: Vec<f64> = (0..n)
        .map(|i| sample_bes3_bridge(root.labeled("excursion").substream(i), &grid, 0.0, 0.0).map(|p| p.values()[mid].powi(2)))
        .collect::<Result<_, _>>()?;
    let (m, se) = mean_se(&ys);
    println!("excursion      E[e(1/2)^2] = {m:.4} ± {se:.4}  (exact 0.75)");

    // Brownian meander on [0, 1]: the endpoint is Rayleigh, E[W⁺(1)] = √(π/2).
    let zs: Vec<f64> = (0..n).map(|i| sample_meander(root.labeled("meander").substream(i), &grid).end()).collect();
    let (m, se) = mean_se(&zs);
    println!("meander        E[W+(1)] = {m:.4} ± {se:.4}  (exact {:.4})", (std::f64::consts::PI / 2.0).sqrt());
    Ok(())
}
