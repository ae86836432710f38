//! Continuity correction for corridor conditioning on a grid.
//!
//! Within one step a Brownian bridge from x to y crosses a linear level with
//! probability exp(−2d₀d₁/Δ), where d₀, d₁ are the distances to the level at
//! the two ends. Both walls are treated independently and multiplied.

use crate::corridor::CorridorNodes;

/// Which side of the level is admissible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Above,
    Below,
}

/// Probability that a bridge from `x` to `y` over `dt` stays on `side` of the
/// level interpolated linearly between `level_start` and `level_end`.
pub fn nocross_prob_step(x: f64, y: f64, dt: f64, level_start: f64, level_end: f64, side: Side) -> f64 {
    let (d0, d1) = match side {
        Side::Above => (x - level_start, y - level_end),
        Side::Below => (level_start - x, level_end - y),
    };
    if d0 <= 0.0 || d1 <= 0.0 {
        return 0.0;
    }
    -(-2.0 * d0 * d1 / dt).exp_m1()
}

/// ln of the one-sided no-crossing probability for distances `d0`, `d1`.
#[inline]
pub fn log_nocross(d0: f64, d1: f64, dt: f64) -> f64 {
    if d0 <= 0.0 || d1 <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let e = 2.0 * d0 * d1 / dt;
    if e > 40.0 {
        // ln(1 − e^{−e}) ≈ −e^{−e}, below 5e−18 in magnitude.
        return 0.0;
    }
    (-(-e).exp_m1()).ln()
}

/// ln P(no crossing of either wall) over one step, given node values inside.
#[inline]
#[allow(clippy::too_many_arguments)]
pub fn log_step_survival(x0: f64, x1: f64, lo0: f64, lo1: f64, hi0: f64, hi1: f64, dt: f64) -> f64 {
    log_nocross(x0 - lo0, x1 - lo1, dt) + log_nocross(hi0 - x0, hi1 - x1, dt)
}

/// ln P(path stays in the corridor | nodes); −∞ on a node violation.
pub fn log_path_survival(values: &[f64], nodes: &CorridorNodes, dt: f64, crossing_corrected: bool) -> f64 {
    if !nodes.contains(values) {
        return f64::NEG_INFINITY;
    }
    if !crossing_corrected {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..values.len() - 1 {
        s += log_step_survival(values[i], values[i + 1], nodes.lo[i], nodes.lo[i + 1], nodes.hi[i], nodes.hi[i + 1], dt);
    }
    s
}

/// ln P(path stays below the levels `hi` | nodes), ignoring any lower wall.
pub fn log_survival_below(values: &[f64], hi: &[f64], dt: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..values.len() - 1 {
        s += log_nocross(hi[i] - values[i], hi[i + 1] - values[i + 1], dt);
        if s == f64::NEG_INFINITY {
            break;
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let p = nocross_prob_step(1.0, 1.0, 1.0, 0.0, 0.0, Side::Above);
        assert!((p - (1.0 - (-2.0f64).exp())).abs() < 1e-15);
        assert_eq!(nocross_prob_step(0.0, 1.0, 1.0, 0.0, 0.0, Side::Above), 0.0);
        assert_eq!(nocross_prob_step(-0.1, 1.0, 1.0, 0.0, 0.0, Side::Above), 0.0);
        let mut prev = 0.0;
        for dt in [1.0, 0.1, 0.01, 0.001] {
            let p = nocross_prob_step(0.2, 0.3, dt, 0.0, 0.0, Side::Above);
            assert!(p > prev);
            prev = p;
        }
        assert!((prev - 1.0).abs() < 1e-12);
        let below = nocross_prob_step(-1.0, -1.0, 1.0, 0.0, 0.0, Side::Below);
        assert!((below - p_above_mirror()).abs() < 1e-15);
    }

    fn p_above_mirror() -> f64 {
        nocross_prob_step(1.0, 1.0, 1.0, 0.0, 0.0, Side::Above)
    }

    #[test]
    fn log_form_agrees() {
        for &(d0, d1, dt) in &[(0.1, 0.2, 0.01), (1.0, 1.0, 1.0), (0.01, 0.5, 1e-3)] {
            let p = nocross_prob_step(d0, d1, dt, 0.0, 0.0, Side::Above);
            assert!((log_nocross(d0, d1, dt) - p.ln()).abs() < 1e-12);
        }
    }
}
