//! A small run of the verification harness: each check prints its record.
//!
//! ```text
//! cargo run --release --example theorem_checks
//! ```

use housemove::corridor::Corridor;
use housemove::drift::DriftModel;
use housemove::reweighting::TableSettings;
use housemove::rng::RngStream;
use housemove::verify::{self, Functional};

fn main() -> housemove::error::Result<()> {
    let k = Corridor::flat(0.0, 1.0)?;
    let ou = DriftModel::Linear { a: 0.0, b: -1.0 };
    let set = TableSettings { steps: 384, paths: 2000, nodes: 16, min_ess: 10.0 };
    let root = RngStream::root(12);
    let event = Corridor::flat(-0.2, 1.2)?;
    let reports = [
        verify::girsanov_consistency(&ou, Some(&event), 0.0, Some(1.0), &Functional::ValueAt(0.5), 20_000, 512, 0.02, root.labeled("girsanov"))?,
        verify::check_chapman_kolmogorov(&ou, &k, (0.25, 0.5, 0.75), 0.5, 0.5, &set, root.labeled("ck"))?,
        verify::check_decomposition(&ou, &k, &[1.0 / 3.0, 2.0 / 3.0], &Functional::ValueAt(0.5), 10_000, &set, root.labeled("decomposition"))?,
        verify::check_reversal(&DriftModel::Constant { c: 1.5 }, &k, 0.25, 10_000, &set, root.labeled("reversal"))?,
        verify::check_degeneration(&k, 0.5, &set, 1000, root.labeled("degeneration"))?,
    ];
    for r in &reports {
        println!("{r}\n");
    }
    let passed = reports.iter().filter(|r| r.passed()).count();
    println!("{passed}/{} checks pass", reports.len());
    Ok(())
}
