//! Densities of house-moving restricted to [0, t] with respect to a shifted
//! three-dimensional Bessel process: the direct and chained evaluators.
//!
//! ```text
//! cargo run --release --example radon_nikodym
//! ```

use housemove::corridor::{Corridor, SamplePath, TimeGrid};
use housemove::drift::DriftModel;
use housemove::exact::fill_bes3;
use housemove::reweighting::{RnTables, TableSettings};
use housemove::rng::RngStream;
use housemove::stats::mean_se;

fn main() -> housemove::error::Result<()> {
    let k = Corridor::flat(0.0, 1.0)?;
    let t = 0.5;
    let set = TableSettings { steps: 256, paths: 4000, nodes: 32, min_ess: 10.0 };
    let tables = RnTables::estimate(&k, &DriftModel::Linear { a: 0.0, b: -1.0 }, t, &set, RngStream::root(4))?;
    let grid = TimeGrid::new(0.0, t, 128)?;
    let (mut rn, mut chained) = (Vec::new(), Vec::new());
    let mut buf = vec![0.0; grid.len()];
    for i in 0..20_000u64 {
        fill_bes3(&mut RngStream::root(4).labeled("bes3").substream(i).rng(), &grid, 0.0, &mut buf);
        let w = SamplePath::new(grid, buf.clone())?;
        let v = tables.rn_cor3(&w)?;
        if v.value > 0.0 && chained.len() < 5 {
            chained.push((v.value, tables.rn_chain(&w)?.value));
        }
        rn.push(v.value);
    }
    let (m, se) = mean_se(&rn);
    let zero = rn.iter().filter(|&&v| v == 0.0).count() as f64 / rn.len() as f64;
    println!("E[rn_cor3] over Bessel paths = {m:.4} ± {se:.4} (a density integrates to 1)");
    println!("fraction of Bessel paths leaving the corridor: {zero:.3}");
    for (a, b) in chained {
        println!("rn_cor3 = {a:.4}, rn_chain = {b:.4}");
    }
    Ok(())
}
