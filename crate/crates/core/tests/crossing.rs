//! Grid crossing corrections against continuous-time survival probabilities.

use housemove::conditioned::log_path_survival;
use housemove::corridor::{Corridor, TimeGrid};
use housemove::exact::fill_brownian;
use housemove::rng::RngStream;
use housemove::stats::mean_se;
use statrs::distribution::{ContinuousCDF, Normal};
use std::f64::consts::PI;

fn phi(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Per-path survival weights and discrete-monitoring indicators.
fn survival(k: &Corridor, steps: usize, paths: u64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let grid = TimeGrid::unit(steps);
    let nodes = k.nodes(&grid, 0.0, 0.0);
    let mut buf = vec![0.0; grid.len()];
    let (mut corrected, mut discrete) = (Vec::new(), Vec::new());
    for i in 0..paths {
        fill_brownian(&mut RngStream::root(seed).substream(i).rng(), &grid, 0.0, &mut buf);
        corrected.push(log_path_survival(&buf, &nodes, grid.dt(), true).exp());
        discrete.push(if nodes.contains(&buf) { 1.0 } else { 0.0 });
    }
    (corrected, discrete)
}

#[test]
fn one_sided_correction_is_exact_on_a_coarse_grid() {
    // P(max_{[0,1]} W < 1) = 2Φ(1) − 1 by the reflection principle.
    let exact = 2.0 * phi(1.0) - 1.0;
    let k = Corridor::flat(-1e6, 1.0).unwrap();
    let (w, _) = survival(&k, 8, 40_000, 11);
    let (m, se) = mean_se(&w);
    assert!((m - exact).abs() < 4.0 * se, "{m} ± {se} vs {exact}");
}

#[test]
fn discrete_monitoring_matches_shifted_barrier() {
    // Discrete monitoring behaves like a continuous barrier shifted outwards
    // by β√Δ with β = −ζ(½)/√(2π) ≈ 0.5826.
    let steps = 64;
    let shifted = 1.0 + 0.5826 / (steps as f64).sqrt();
    let approx = 2.0 * phi(shifted) - 1.0;
    let k = Corridor::flat(-1e6, 1.0).unwrap();
    let (_, ind) = survival(&k, steps, 40_000, 12);
    let (m, se) = mean_se(&ind);
    assert!((m - approx).abs() < 4.0 * se + 0.005, "{m} ± {se} vs {approx}");
    // Without the shift the discrete estimate is visibly biased upwards.
    assert!(m - (2.0 * phi(1.0) - 1.0) > 0.02);
}

#[test]
fn two_sided_correction_matches_series() {
    // P(|W| < 1 on [0, 1]) = (4/π) Σ (−1)^n/(2n+1) exp(−(2n+1)²π²/8).
    let exact: f64 = (0..20)
        .map(|n| {
            let m = (2 * n + 1) as f64;
            4.0 / PI * if n % 2 == 0 { 1.0 } else { -1.0 } / m * (-m * m * PI * PI / 8.0).exp()
        })
        .sum();
    let k = Corridor::flat(-1.0, 1.0).unwrap();
    let (w, _) = survival(&k, 32, 40_000, 13);
    let (m, se) = mean_se(&w);
    assert!((m - exact).abs() < 4.0 * se + 0.003, "{m} ± {se} vs {exact}");
}
