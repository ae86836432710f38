//! One-time density h(½, ·) of Brownian house-moving and its drifted
//! counterpart h_μ for dX = −X dt + dW, written next to each other.
//!
//! ```text
//! cargo run --release --example transition_densities
//! ```

use housemove::corridor::Corridor;
use housemove::drift::DriftModel;
use housemove::reweighting::{HouseMovingTables, TableSettings};
use housemove::rng::RngStream;

fn main() -> housemove::error::Result<()> {
    let k = Corridor::flat(0.0, 1.0)?;
    let set = TableSettings { steps: 256, paths: 4000, nodes: 16, min_ess: 10.0 };
    let stream = RngStream::root(3);
    let h = HouseMovingTables::estimate(&k, &DriftModel::Zero, 0.5, &set, stream)?.h(&k)?;
    let hmu = HouseMovingTables::estimate(&k, &DriftModel::Linear { a: 0.0, b: -1.0 }, 0.5, &set, stream)?.h_mu(&k)?;
    println!("mass of h   = {:.4} ± {:.4}", h.mass, h.mass_se);
    println!("mass of h_mu = {:.4} ± {:.4}", hmu.mass, hmu.mass_se);
    println!("{:>8} {:>10} {:>10}", "y", "h", "h_mu");
    for i in 0..h.y.len() {
        println!("{:>8.4} {:>10.4} {:>10.4}", h.y[i], h.values[i], hmu.values[i]);
    }
    Ok(())
}
