//! Gaussian tail functions and truncated-normal sampling.

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::{erfc, erfc_inv};
use std::f64::consts::{PI, SQRT_2};

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal density.
pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Gaussian density with variance `var` at `x`.
pub fn gauss_density(x: f64, var: f64) -> f64 {
    (-0.5 * x * x / var).exp() / (2.0 * PI * var).sqrt()
}

/// Upper tail P(Z > z).
pub fn norm_sf(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

/// P(Z ≤ z).
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// z with P(Z > z) = p.
pub fn norm_isf(p: f64) -> f64 {
    SQRT_2 * erfc_inv(2.0 * p)
}

/// ln P(Z > z), accurate far into the upper tail.
pub fn ln_norm_sf(z: f64) -> f64 {
    if z < 30.0 {
        norm_sf(z).ln()
    } else {
        // Mills ratio asymptotics.
        let z2 = z * z;
        -0.5 * z2 - z.ln() - LN_SQRT_2PI + (1.0 - 1.0 / z2 + 3.0 / (z2 * z2)).ln()
    }
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Uniform on the open interval (0,1).
pub fn open_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Draw from N(mean, sd²) restricted to [lo, hi]; returns the draw and the
/// log of the Gaussian mass of [lo, hi].
pub fn truncated_normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64, lo: f64, hi: f64) -> (f64, f64) {
    debug_assert!(sd > 0.0 && lo <= hi);
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    if a <= -8.0 && b >= 8.0 {
        loop {
            let z = standard_normal(rng);
            if z >= a && z <= b {
                return (mean + sd * z, 0.0);
            }
        }
    }
    let (z, ln_mass) = if a >= 0.0 {
        upper_tail_segment(rng, a, b)
    } else if b <= 0.0 {
        let (z, m) = upper_tail_segment(rng, -b, -a);
        (-z, m)
    } else {
        let pa = norm_sf(-a); // P(Z < a)
        let pb = norm_sf(b);
        let mass = 1.0 - pa - pb;
        let u = open_uniform(rng);
        let p = pa + u * mass;
        let z = if p < 0.5 { -norm_isf(p) } else { norm_isf(1.0 - p) };
        (z.clamp(a, b), mass.ln())
    };
    (mean + sd * z, ln_mass)
}

/// Z restricted to [a, b] with 0 ≤ a ≤ b.
fn upper_tail_segment<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> (f64, f64) {
    if a > 30.0 {
        return robert_tail(rng, a, b);
    }
    let pa = norm_sf(a);
    let pb = norm_sf(b);
    let mass = pa - pb;
    if !(mass > 0.0) || mass < 1e-300 {
        return robert_tail(rng, a, b);
    }
    let u = open_uniform(rng);
    let z = norm_isf(pb + u * mass);
    (z.clamp(a, b), mass.ln())
}

/// Exponential-proposal rejection for deep tails.
fn robert_tail<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> (f64, f64) {
    let ln_mass = if b.is_finite() {
        let la = ln_norm_sf(a);
        let lb = ln_norm_sf(b);
        la + (-(lb - la).exp()).ln_1p()
    } else {
        ln_norm_sf(a)
    };
    if b - a < 1.0 / a {
        // Narrow window: uniform proposal against the decreasing density.
        loop {
            let z = a + (b - a) * rng.random::<f64>();
            if open_uniform(rng).ln() <= 0.5 * (a * a - z * z) {
                return (z, ln_mass);
            }
        }
    }
    let lambda = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let z = a - open_uniform(rng).ln() / lambda;
        if z > b {
            continue;
        }
        if open_uniform(rng).ln() <= -0.5 * (z - lambda) * (z - lambda) {
            return (z, ln_mass);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn tails_are_consistent() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((norm_sf(1.96) - 0.024_997_895).abs() < 1e-8);
        for &p in &[1e-12, 1e-5, 0.1, 0.4] {
            assert!((norm_sf(norm_isf(p)) / p - 1.0).abs() < 1e-9, "p = {p}");
        }
        assert!((ln_norm_sf(29.999) - ln_norm_sf(30.001)).abs() < 0.1);
    }

    #[test]
    fn truncated_draws_stay_inside_and_match_mass() {
        let mut rng = RngStream::root(11).rng();
        for &(lo, hi) in &[(-0.5, 0.3), (1.0, 2.0), (-3.0, -2.5), (40.0, 41.0), (-1e9, 1e9)] {
            let mut sum = 0.0;
            let n = 20_000;
            let mut lm = 0.0;
            for _ in 0..n {
                let (x, m) = truncated_normal(&mut rng, 0.0, 1.0, lo, hi);
                assert!(x >= lo && x <= hi);
                sum += x;
                lm = m;
            }
            let expected_mass = norm_cdf(hi) - norm_cdf(lo);
            if expected_mass > 1e-200 {
                assert!((lm - expected_mass.ln()).abs() < 1e-6, "{lo} {hi}");
            }
            // Truncated mean: (φ(a) − φ(b)) / mass.
            if hi - lo < 10.0 && expected_mass > 1e-12 {
                let mean = (norm_pdf(lo) - norm_pdf(hi)) / expected_mass;
                assert!((sum / n as f64 - mean).abs() < 0.02, "{lo} {hi}");
            }
        }
    }
}
