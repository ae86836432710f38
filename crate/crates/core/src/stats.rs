//! Statistical utilities: KS tests, weighted means, regressions.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// ln Σ exp(xᵢ), with −∞ for an empty or all −∞ input.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Normalized weights from log-weights after max subtraction.
pub fn normalized_weights(log_weights: &[f64]) -> Option<Vec<f64>> {
    let m = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return None;
    }
    let w: Vec<f64> = log_weights.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = w.iter().sum();
    Some(w.into_iter().map(|v| v / s).collect())
}

/// (Σw)²/Σw² from log-weights; 0 when every weight vanishes.
pub fn ess(log_weights: &[f64]) -> f64 {
    match normalized_weights(log_weights) {
        Some(w) => 1.0 / w.iter().map(|v| v * v).sum::<f64>(),
        None => 0.0,
    }
}

/// Sample mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, f64::INFINITY);
    }
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let (m, _) = mean_se(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Mean of exp(log_values) with standard error, computed stably. Returns
/// `(ln mean, relative standard error)`.
pub fn log_mean_exp(log_values: &[f64]) -> (f64, f64) {
    let m = log_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || log_values.is_empty() {
        return (f64::NEG_INFINITY, f64::INFINITY);
    }
    let scaled: Vec<f64> = log_values.iter().map(|x| (x - m).exp()).collect();
    let (mean, se) = mean_se(&scaled);
    (m + mean.ln(), se / mean)
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Linear-interpolated empirical quantile.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v: Vec<f64> = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let h = q * (v.len() - 1) as f64;
    let i = h.floor() as usize;
    if i + 1 >= v.len() {
        return v[v.len() - 1];
    }
    v[i] + (h - i as f64) * (v[i + 1] - v[i])
}

/// Quantile of a weighted sample: the smallest x with weighted CDF ≥ q.
pub fn weighted_quantile(xs: &[f64], weights: &[f64], q: f64) -> f64 {
    let mut v: Vec<(f64, f64)> = xs.iter().copied().zip(weights.iter().copied()).filter(|p| p.1 > 0.0).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = v.iter().map(|p| p.1).sum();
    let mut c = 0.0;
    for &(x, w) in &v {
        c += w;
        if c >= q * total {
            return x;
        }
    }
    v.last().map_or(f64::NAN, |p| p.0)
}

/// P(K > λ) for the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        let x = PI * PI / (8.0 * lambda * lambda);
        let s: f64 = (1..=6).map(|k| (-((2 * k - 1) as f64).powi(2) * x).exp()).sum();
        return (1.0 - (2.0 * PI).sqrt() / lambda * s).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Asymptotic KS p-value for statistic `d` and effective size `n_e`.
pub fn ks_p_value(d: f64, n_e: f64) -> f64 {
    let s = n_e.sqrt();
    kolmogorov_sf((s + 0.12 + 0.11 / s) * d)
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::Argument("KS test needs two nonempty samples".into()));
    }
    let wx = vec![1.0; xs.len()];
    let wy = vec![1.0; ys.len()];
    let d = weighted_ks_statistic(xs, &wx, ys, &wy);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    Ok((d, ks_p_value(d, n * m / (n + m))))
}

fn weighted_ks_statistic(xs: &[f64], wx: &[f64], ys: &[f64], wy: &[f64]) -> f64 {
    let mut a: Vec<(f64, f64)> = xs.iter().copied().zip(wx.iter().copied()).collect();
    let mut b: Vec<(f64, f64)> = ys.iter().copied().zip(wy.iter().copied()).collect();
    a.sort_by(|p, q| p.0.total_cmp(&q.0));
    b.sort_by(|p, q| p.0.total_cmp(&q.0));
    let sa: f64 = wx.iter().sum();
    let sb: f64 = wy.iter().sum();
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb, mut d) = (0.0f64, 0.0f64, 0.0f64);
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(p), Some(q)) => p.0.min(q.0),
            (Some(p), None) => p.0,
            (None, Some(q)) => q.0,
            (None, None) => break,
        };
        while i < a.len() && a[i].0 == x {
            fa += a[i].1 / sa;
            i += 1;
        }
        while j < b.len() && b[j].0 == x {
            fb += b[j].1 / sb;
            j += 1;
        }
        d = d.max((fa - fb).abs());
    }
    d
}

/// Weighted-ECDF KS test; the p-value uses the effective sample sizes.
pub fn weighted_ks(xs: &[f64], log_wx: &[f64], ys: &[f64], log_wy: &[f64]) -> Result<(f64, f64)> {
    if xs.is_empty() || ys.is_empty() || xs.len() != log_wx.len() || ys.len() != log_wy.len() {
        return Err(Error::Argument("weighted KS test needs nonempty samples with matching weights".into()));
    }
    let wx = normalized_weights(log_wx).ok_or_else(|| Error::degeneracy("weighted KS", "all weights vanish"))?;
    let wy = normalized_weights(log_wy).ok_or_else(|| Error::degeneracy("weighted KS", "all weights vanish"))?;
    let d = weighted_ks_statistic(xs, &wx, ys, &wy);
    let (n, m) = (ess(log_wx), ess(log_wy));
    Ok((d, ks_p_value(d, n * m / (n + m))))
}

/// Least-squares line y = intercept + slope·x; returns (intercept, slope).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

/// Weighted polynomial least squares with known per-point standard errors.
/// Returns the coefficients and their standard errors (from the inverse normal
/// matrix, i.e. propagated input errors).
pub fn weighted_poly_fit(x: &[f64], y: &[f64], se: &[f64], degree: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let p = degree + 1;
    if x.len() < p {
        return Err(Error::Argument(format!("polynomial fit of degree {degree} needs ≥ {p} points")));
    }
    let mut a = vec![vec![0.0; p]; p];
    let mut rhs = vec![0.0; p];
    for ((&xi, &yi), &si) in x.iter().zip(y).zip(se) {
        let w = 1.0 / (si * si).max(1e-300);
        let pow: Vec<f64> = (0..p).map(|k| xi.powi(k as i32)).collect();
        for r in 0..p {
            rhs[r] += w * pow[r] * yi;
            for c in 0..p {
                a[r][c] += w * pow[r] * pow[c];
            }
        }
    }
    let inv = invert(a)?;
    let coeffs = (0..p).map(|r| (0..p).map(|c| inv[r][c] * rhs[c]).sum()).collect();
    let ses = (0..p).map(|r| inv[r][r].max(0.0).sqrt()).collect();
    Ok((coeffs, ses))
}

fn invert(mut a: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    let mut inv: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        if a[piv][col].abs() < 1e-300 {
            return Err(Error::Numeric { step: col, message: "singular normal matrix".into() });
        }
        a.swap(col, piv);
        inv.swap(col, piv);
        let d = a[col][col];
        for k in 0..n {
            a[col][k] /= d;
            inv[col][k] /= d;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                for k in 0..n {
                    a[r][k] -= f * a[col][k];
                    inv[r][k] -= f * inv[col][k];
                }
            }
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::special::standard_normal;
    use proptest::prelude::*;

    fn normals(seed: u64, n: usize, shift: f64) -> Vec<f64> {
        let mut r = RngStream::root(seed).rng();
        (0..n).map(|_| shift + standard_normal(&mut r)).collect()
    }

    #[test]
    fn weighted_quantile_examples() {
        assert_eq!(weighted_quantile(&[3.0, 1.0, 2.0], &[1.0, 1.0, 1.0], 0.5), 2.0);
        assert_eq!(weighted_quantile(&[1.0, 2.0, 3.0], &[0.0, 0.1, 0.9], 0.5), 3.0);
        assert_eq!(weighted_quantile(&[1.0, 2.0], &[1.0, 1.0], 0.0), 1.0);
    }

    #[test]
    fn ks_examples() {
        let xs = normals(1, 1000, 0.0);
        let (d, p) = ks_two_sample(&xs, &xs).unwrap();
        assert_eq!(d, 0.0);
        assert_eq!(p, 1.0);
        let (_, p) = ks_two_sample(&normals(2, 10_000, 0.0), &normals(3, 10_000, 3.0)).unwrap();
        assert!(p < 1e-6);
        assert!(ks_two_sample(&[], &xs).is_err());
    }

    #[test]
    fn ks_null_p_values_are_calibrated() {
        let below = (0..200)
            .filter(|&r| {
                let (_, p) = ks_two_sample(&normals(100 + 2 * r, 500, 0.0), &normals(101 + 2 * r, 700, 0.0)).unwrap();
                p < 0.05
            })
            .count();
        let frac = below as f64 / 200.0;
        assert!((0.02..=0.09).contains(&frac), "fraction {frac}");
    }

    #[test]
    fn kolmogorov_branches_agree() {
        for &l in &[0.95, 1.0, 1.05] {
            let x = PI * PI / (8.0 * l * l);
            let small: f64 = 1.0 - (2.0 * PI).sqrt() / l * (1..=6).map(|k| (-((2 * k - 1) as f64).powi(2) * x).exp()).sum::<f64>();
            let big: f64 = 2.0 * (1..=50).map(|k| (if k % 2 == 1 { 1.0 } else { -1.0 }) * (-2.0 * (k * k) as f64 * l * l).exp()).sum::<f64>();
            assert!((small - big).abs() < 1e-12);
        }
        assert!((kolmogorov_sf(1.36) - 0.0494).abs() < 1e-3);
    }

    #[test]
    fn weighted_ks_with_equal_weights_matches_plain() {
        let (xs, ys) = (normals(5, 300, 0.0), normals(6, 400, 0.1));
        let a = ks_two_sample(&xs, &ys).unwrap();
        let b = weighted_ks(&xs, &vec![0.3; 300], &ys, &vec![-2.0; 400]).unwrap();
        assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-9);
    }

    #[test]
    fn poly_fit_recovers_exact_quadratic() {
        let x = [0.1, 0.2, 0.4, 0.8];
        let y: Vec<f64> = x.iter().map(|v| 1.0 - 2.0 * v + 0.5 * v * v).collect();
        let (c, s) = weighted_poly_fit(&x, &y, &[0.01; 4], 2).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-10 && (c[1] + 2.0).abs() < 1e-9 && (c[2] - 0.5).abs() < 1e-8);
        assert!(s[0] > 0.0);
    }

    proptest! {
        #[test]
        fn ess_is_bounded(lw in proptest::collection::vec(-20.0f64..20.0, 1..50)) {
            let e = ess(&lw);
            prop_assert!(e > 0.0 && e <= lw.len() as f64 + 1e-9);
        }

        #[test]
        fn ess_is_full_for_equal_weights(c in -50.0f64..50.0, n in 1usize..40) {
            prop_assert!((ess(&vec![c; n]) - n as f64).abs() < 1e-9);
        }
    }
}
