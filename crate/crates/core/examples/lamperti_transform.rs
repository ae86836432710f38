//! Reduce dU = ν(U)dt + σ(U)dW to unit diffusion and carry a corridor across.
//!
//! ```text
//! cargo run --release --example lamperti_transform
//! ```

use housemove::corridor::Curve;
use housemove::drift::{lamperti_transform, SdeModel};

fn main() -> housemove::error::Result<()> {
    let m = SdeModel { nu: vec![0.0, 0.1], sigma: vec![0.5, 0.1], range: [-1.0, 2.0] };
    let tr = lamperti_transform(&m)?;
    println!("{}", tr.drift);
    println!("{:>6} {:>10} {:>10} {:>12}", "u", "L(u)", "mu(L(u))", "closed form");
    for u in [-0.5, 0.0, 0.5, 1.0, 1.5] {
        let x = tr.map.l(u);
        let exact = 0.1 * u / (0.5 + 0.1 * u) - 0.05;
        println!("{u:>6} {x:>10.5} {:>10.5} {exact:>12.5}", tr.drift.mu(x));
    }
    let upper = tr.map.transform_curve(&Curve::linear(0.5, 0.25), 256);
    println!("transformed ceiling: L(0.5) = {:.5} at t = 0, L(0.75) = {:.5} at t = 1", upper.value(0.0), upper.value(1.0));
    println!("round trip L^-1(L(1.2)) = {:.8}", tr.map.l_inv(tr.map.l(1.2)));
    Ok(())
}
