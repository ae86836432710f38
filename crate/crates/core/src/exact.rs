//! Exact samplers for the unconditioned building blocks.
//!
//! The `fill_*` functions write node values into a caller-provided buffer
//! (length `grid.len()`) and are what the hot loops use; the `sample_*`
//! wrappers take an [`RngStream`] and return a [`SamplePath`].

use crate::corridor::{SamplePath, TimeGrid};
use crate::drift::{n_functional, DriftModel};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::special::{open_uniform, standard_normal};
use rand::Rng;

/// Brownian motion started at `start`.
pub fn fill_brownian<R: Rng + ?Sized>(rng: &mut R, grid: &TimeGrid, start: f64, out: &mut [f64]) {
    let sd = grid.dt().sqrt();
    out[0] = start;
    for i in 0..grid.n_steps() {
        out[i + 1] = out[i] + sd * standard_normal(rng);
    }
}

/// One step of the forward bridge recursion with `rem` steps left to reach `b`.
#[inline]
pub fn bridge_step<R: Rng + ?Sized>(rng: &mut R, x: f64, b: f64, rem: usize, dt: f64) -> f64 {
    if rem == 1 {
        return b;
    }
    let r = rem as f64;
    x + (b - x) / r + (dt * (r - 1.0) / r).sqrt() * standard_normal(rng)
}

/// Brownian bridge from `a` to `b` by forward conditional-Gaussian recursion.
pub fn fill_bridge<R: Rng + ?Sized>(rng: &mut R, grid: &TimeGrid, a: f64, b: f64, out: &mut [f64]) {
    let n = grid.n_steps();
    let dt = grid.dt();
    out[0] = a;
    for i in 0..n {
        out[i + 1] = bridge_step(rng, out[i], b, n - i, dt);
    }
}

/// BES(3) bridge from `c` to `d`: norm of a 3-d bridge from (c,0,0) to (d,0,0).
pub fn fill_bes3_bridge<R: Rng + ?Sized>(rng: &mut R, grid: &TimeGrid, c: f64, d: f64, out: &mut [f64]) {
    let n = grid.n_steps();
    let dt = grid.dt();
    let (mut x, mut y, mut z) = (c, 0.0, 0.0);
    out[0] = c;
    for i in 0..n {
        let rem = n - i;
        if rem == 1 {
            out[i + 1] = d;
            break;
        }
        x = bridge_step(rng, x, d, rem, dt);
        y = bridge_step(rng, y, 0.0, rem, dt);
        z = bridge_step(rng, z, 0.0, rem, dt);
        out[i + 1] = (x * x + y * y + z * z).sqrt();
    }
}

/// BES(3) process from `start`: norm of 3-d Brownian motion from (start,0,0).
pub fn fill_bes3<R: Rng + ?Sized>(rng: &mut R, grid: &TimeGrid, start: f64, out: &mut [f64]) {
    let sd = grid.dt().sqrt();
    let (mut x, mut y, mut z) = (start, 0.0, 0.0);
    out[0] = start;
    for i in 0..grid.n_steps() {
        x += sd * standard_normal(rng);
        y += sd * standard_normal(rng);
        z += sd * standard_normal(rng);
        out[i + 1] = (x * x + y * y + z * z).sqrt();
    }
}

/// Rayleigh draw with scale √duration: the meander end point.
pub fn meander_endpoint<R: Rng + ?Sized>(rng: &mut R, duration: f64) -> f64 {
    (-2.0 * duration * open_uniform(rng).ln()).sqrt()
}

/// Brownian meander from 0: BES(3) bridge from 0 to a Rayleigh end point.
pub fn fill_meander<R: Rng + ?Sized>(rng: &mut R, grid: &TimeGrid, out: &mut [f64]) {
    let r = meander_endpoint(rng, grid.duration());
    fill_bes3_bridge(rng, grid, 0.0, r, out);
}

/// Euler–Maruyama for dX = μ(X)dt + dW.
pub fn fill_diffusion<R: Rng + ?Sized>(rng: &mut R, grid: &TimeGrid, d: &DriftModel, a: f64, out: &mut [f64]) -> Result<()> {
    let dt = grid.dt();
    let sd = dt.sqrt();
    out[0] = a;
    for i in 0..grid.n_steps() {
        let x = out[i];
        let next = x + d.mu(x) * dt + sd * standard_normal(rng);
        if !next.is_finite() {
            return Err(Error::Numeric { step: i + 1, message: format!("Euler–Maruyama state diverged from {x}") });
        }
        out[i + 1] = next;
    }
    Ok(())
}

fn with_buffer(grid: &TimeGrid, f: impl FnOnce(&mut [f64])) -> SamplePath {
    let mut v = vec![0.0; grid.len()];
    f(&mut v);
    SamplePath::new(*grid, v).expect("sampler produced finite values")
}

pub fn sample_brownian(rng: RngStream, grid: &TimeGrid, start: f64) -> SamplePath {
    with_buffer(grid, |v| fill_brownian(&mut rng.rng(), grid, start, v))
}

pub fn sample_bridge(rng: RngStream, grid: &TimeGrid, a: f64, b: f64) -> SamplePath {
    with_buffer(grid, |v| fill_bridge(&mut rng.rng(), grid, a, b, v))
}

pub fn sample_bes3_bridge(rng: RngStream, grid: &TimeGrid, c: f64, d: f64) -> Result<SamplePath> {
    if !(c >= 0.0 && d >= 0.0) {
        return Err(Error::Domain(format!("BES(3) bridge needs non-negative end points, got {c} → {d}")));
    }
    Ok(with_buffer(grid, |v| fill_bes3_bridge(&mut rng.rng(), grid, c, d, v)))
}

pub fn sample_bes3(rng: RngStream, grid: &TimeGrid, start: f64) -> Result<SamplePath> {
    if !(start >= 0.0) {
        return Err(Error::Domain(format!("BES(3) process needs a non-negative start, got {start}")));
    }
    Ok(with_buffer(grid, |v| fill_bes3(&mut rng.rng(), grid, start, v)))
}

pub fn sample_meander(rng: RngStream, grid: &TimeGrid) -> SamplePath {
    with_buffer(grid, |v| fill_meander(&mut rng.rng(), grid, v))
}

pub fn sample_diffusion(rng: RngStream, grid: &TimeGrid, d: &DriftModel, a: f64) -> Result<SamplePath> {
    let mut v = vec![0.0; grid.len()];
    fill_diffusion(&mut rng.rng(), grid, d, a, &mut v)?;
    SamplePath::new(*grid, v)
}

/// A Brownian bridge from `a` to `b` with its Girsanov log-weight −½N.
pub fn sample_diffusion_bridge(rng: RngStream, grid: &TimeGrid, d: &DriftModel, a: f64, b: f64) -> (SamplePath, f64) {
    let w = sample_bridge(rng, grid, a, b);
    let lw = -0.5 * n_functional(d, w.values(), grid.dt());
    (w, lw)
}
