//! Girsanov reweighting, kernel tables, transition densities and
//! Radon–Nikodym evaluators.

mod constant;
mod density;
mod pieces;
mod rn;
mod table;

pub use constant::{estimate_c_constant, estimate_c_normalization, CEstimate, CFit, CLevel};
pub use density::{
    estimate_h, estimate_h_mu, estimate_h_mu_transition, estimate_h_transition, estimate_k, estimate_k_mu, estimate_p_histogram,
    estimate_p_kernel, estimate_q_down, estimate_q_up, estimate_zeta, HouseMovingTables, MeanderTables, TransitionTables,
};
pub use pieces::{
    bridge_pieces, free_pieces, housemoving_stats, lower_pieces, meander_stats, piece_stats, upper_pieces, PieceStats, PieceTable,
    TableSettings,
};
pub use rn::{RnTables, RnValue};
pub use table::{kernel_grid, DensityEstimate, KernelTable};

use crate::conditioned::WeightedEnsemble;
use crate::corridor::SamplePath;
use crate::drift::{eval_n, DriftModel};
use crate::error::{Error, Result};
use crate::stats::normalized_weights;

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

impl Estimate {
    pub fn new(value: f64, std_err: f64) -> Self {
        Self { value, std_err }
    }

    pub fn exact(value: f64) -> Self {
        Self { value, std_err: 0.0 }
    }

    /// Relative standard error; 0 for exact values.
    pub fn rel(&self) -> f64 {
        if self.std_err == 0.0 {
            0.0
        } else {
            self.std_err / self.value.abs()
        }
    }

    pub fn scale(self, c: f64) -> Self {
        Self { value: self.value * c, std_err: self.std_err * c.abs() }
    }
}

/// Pinned-path log-weight −½N(w).
pub fn logweight_bridge(d: &DriftModel, w: &SamplePath) -> f64 {
    if d.is_zero() {
        return 0.0;
    }
    -0.5 * eval_n(d, w)
}

/// Unpinned log-weight G(w(T)) − ½N(w).
pub fn logweight_unpinned(d: &DriftModel, w: &SamplePath) -> Result<f64> {
    if d.is_zero() {
        return Ok(0.0);
    }
    Ok(d.big_g(w.end())? - 0.5 * eval_n(d, w))
}

/// Self-normalized importance-sampling result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snis {
    pub estimate: f64,
    pub std_err: f64,
    pub ess: f64,
}

/// Σwᵢfᵢ / Σwᵢ with the delta-method standard error.
pub fn snis_values(log_weights: &[f64], values: &[f64]) -> Result<Snis> {
    if log_weights.len() != values.len() {
        return Err(Error::Argument("weights and values differ in length".into()));
    }
    let w = normalized_weights(log_weights).ok_or_else(|| Error::degeneracy("snis", "all weights are zero"))?;
    let ess = 1.0 / w.iter().map(|v| v * v).sum::<f64>();
    let live: Vec<f64> = values.iter().zip(&w).filter(|(_, &wi)| wi > 0.0).map(|(&v, _)| v).collect();
    if live.iter().all(|&v| v == live[0]) {
        return Ok(Snis { estimate: live[0], std_err: 0.0, ess });
    }
    let est: f64 = w.iter().zip(values).filter(|(&wi, _)| wi > 0.0).map(|(wi, v)| wi * v).sum();
    let var: f64 = w.iter().zip(values).filter(|(&wi, _)| wi > 0.0).map(|(wi, v)| wi * wi * (v - est).powi(2)).sum();
    Ok(Snis { estimate: est, std_err: var.sqrt(), ess })
}

/// SNIS of a functional of the recorded nodes over a weighted ensemble.
pub fn snis(ensemble: &WeightedEnsemble, f: impl Fn(&[f64]) -> f64) -> Result<Snis> {
    let values: Vec<f64> = (0..ensemble.len()).map(|i| f(ensemble.row(i))).collect();
    snis_values(ensemble.log_weights(), &values)
}
