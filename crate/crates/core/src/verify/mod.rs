//! Statistical acceptance tests, one per main result.

mod decomposition;
mod densities;
mod girsanov;
mod identities;
mod paths;

pub use crate::stats::ks_two_sample;
pub use decomposition::{check_decomposition, check_decomposition2};
pub use densities::{check_chapman_kolmogorov, check_reversal};
pub use girsanov::girsanov_consistency;
pub use identities::{check_bessel_identification, check_degeneration, check_rn_chain};
pub use paths::{check_boundary_avoidance, check_moment_bounds, estimate_holder_exponent, holder_exponents, ProbeSide};

use crate::corridor::TimeGrid;
use std::fmt;
use std::io::Write;
use std::time::Duration;

/// Outcome of a test. Probes record statistics without a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Probe,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Probe => "PROBE",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestReport {
    pub name: String,
    pub statistics: Vec<(String, f64)>,
    pub thresholds: Vec<(String, f64)>,
    pub verdict: Verdict,
    pub sample_sizes: Vec<(String, usize)>,
    pub seed: u64,
    pub runtime: Duration,
    pub notes: Vec<String>,
}

impl TestReport {
    pub fn new(name: impl Into<String>, seed: u64) -> Self {
        Self {
            name: name.into(),
            statistics: vec![],
            thresholds: vec![],
            verdict: Verdict::Probe,
            sample_sizes: vec![],
            seed,
            runtime: Duration::ZERO,
            notes: vec![],
        }
    }

    pub fn stat(mut self, key: impl Into<String>, v: f64) -> Self {
        self.statistics.push((key.into(), v));
        self
    }

    pub fn threshold(mut self, key: impl Into<String>, v: f64) -> Self {
        self.thresholds.push((key.into(), v));
        self
    }

    pub fn samples(mut self, key: impl Into<String>, n: usize) -> Self {
        self.sample_sizes.push((key.into(), n));
        self
    }

    pub fn note(mut self, s: impl Into<String>) -> Self {
        self.notes.push(s.into());
        self
    }

    pub fn verdict(mut self, v: Verdict) -> Self {
        self.verdict = v;
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Fail
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.statistics.iter().find(|(k, _)| k == key).map(|p| p.1)
    }

    /// Structured text record without timing, so output files stay reproducible.
    pub fn write_record<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "[{}] {}", self.name, self.verdict.label())?;
        writeln!(out, "  seed = {}", self.seed)?;
        for (k, v) in &self.statistics {
            writeln!(out, "  {k} = {}", Num(*v))?;
        }
        for (k, v) in &self.thresholds {
            writeln!(out, "  threshold {k} = {}", Num(*v))?;
        }
        for (k, n) in &self.sample_sizes {
            writeln!(out, "  samples {k} = {n}")?;
        }
        for n in &self.notes {
            writeln!(out, "  note: {n}")?;
        }
        Ok(())
    }

    pub const CSV_HEADER: &'static str = "name,verdict,statistics,thresholds,sample_sizes,seed";

    pub fn csv_row(&self) -> String {
        let join = |xs: &[(String, f64)]| xs.iter().map(|(k, v)| format!("{k}={}", Num(*v))).collect::<Vec<_>>().join(";");
        let sizes = self.sample_sizes.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";");
        format!("{},{},{},{},{},{}", self.name, self.verdict.label(), join(&self.statistics), join(&self.thresholds), sizes, self.seed)
    }
}

/// Shortest round-trip form, switching to exponent notation for very small
/// or very large magnitudes.
struct Num(f64);

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = self.0.abs();
        if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
            write!(f, "{:e}", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl fmt::Display for TestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut buf = Vec::new();
        self.write_record(&mut buf).map_err(|_| fmt::Error)?;
        write!(f, "{}", String::from_utf8_lossy(&buf))?;
        write!(f, "  runtime = {:.2?}", self.runtime)
    }
}

/// Bounded path functionals offered to the decomposition and Girsanov checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Functional {
    /// w(t) at a grid time.
    ValueAt(f64),
    /// max_{u ≤ until} w(u), clipped to [lo, hi].
    ClippedRunningMax { until: f64, lo: f64, hi: f64 },
    Constant(f64),
}

impl Functional {
    /// Evaluate on node values of a path over `grid`.
    pub fn eval(&self, grid: &TimeGrid, values: &[f64]) -> f64 {
        match *self {
            Functional::ValueAt(t) => values[grid.nearest_index(t)],
            Functional::ClippedRunningMax { until, lo, hi } => {
                let j = grid.nearest_index(until);
                values[..=j].iter().copied().fold(f64::NEG_INFINITY, f64::max).clamp(lo, hi)
            }
            Functional::Constant(c) => c,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Functional::ValueAt(t) => format!("value_at_{t}"),
            Functional::ClippedRunningMax { until, .. } => format!("clipped_max_to_{until}"),
            Functional::Constant(c) => format!("constant_{c}"),
        }
    }
}

pub(crate) fn combined(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn functionals() {
        let g = TimeGrid::unit(4);
        let v = [0.0, 0.8, 0.3, 1.4, 1.0];
        assert_eq!(Functional::ValueAt(0.5).eval(&g, &v), 0.3);
        assert_eq!(Functional::ClippedRunningMax { until: 0.5, lo: 0.0, hi: 1.0 }.eval(&g, &v), 0.8);
        assert_eq!(Functional::ClippedRunningMax { until: 1.0, lo: 0.0, hi: 1.0 }.eval(&g, &v), 1.0);
    }

    #[test]
    fn csv_row_has_no_runtime() {
        let mut r = TestReport::new("x", 7).stat("a", 1.5).verdict(Verdict::Pass);
        r.runtime = Duration::from_secs(3);
        assert_eq!(r.csv_row(), "x,PASS,a=1.5,,,7");
        let r = TestReport::new("y", 1).stat("p", 1.5e-200).stat("z", 0.0);
        assert_eq!(r.csv_row(), "y,PROBE,p=1.5e-200;z=0,,,1");
    }
}
