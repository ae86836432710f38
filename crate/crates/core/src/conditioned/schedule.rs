//! ε-schedules and boundary-anchor descriptions.

use crate::corridor::Corridor;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Margin as a function of ε.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MarginRule {
    /// η(ε) = ε
    Equal,
    /// η(ε) = factor·ε
    Scaled { factor: f64 },
    /// η(ε) = 0 (the asymmetric meander form)
    Zero,
}

impl MarginRule {
    pub fn apply(&self, eps: f64) -> f64 {
        match self {
            MarginRule::Equal => eps,
            MarginRule::Scaled { factor } => factor * eps,
            MarginRule::Zero => 0.0,
        }
    }
}

/// Geometric sequence ε_k = ε₀·ρ^k, k = 0..levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonSchedule {
    pub eps0: f64,
    pub ratio: f64,
    pub levels: usize,
    pub eta_minus: MarginRule,
    pub eta_plus: MarginRule,
}

impl EpsilonSchedule {
    /// ε₀ = 0.2·min(min width, √T), ρ = ½, five levels, η± = ε.
    pub fn default_for(k: &Corridor) -> Self {
        let t = k.t_end() - k.t_start();
        Self {
            eps0: 0.2 * k.min_width().min(t.sqrt()),
            ratio: 0.5,
            levels: 5,
            eta_minus: MarginRule::Equal,
            eta_plus: MarginRule::Equal,
        }
    }

    pub fn with_levels(mut self, levels: usize) -> Self {
        self.levels = levels;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps0 > 0.0 && self.eps0.is_finite()) {
            return Err(Error::Config(format!("schedule eps0 = {} must be positive", self.eps0)));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::Config(format!("schedule ratio = {} must lie in (0, 1)", self.ratio)));
        }
        if self.levels == 0 {
            return Err(Error::Config("schedule needs at least one level".into()));
        }
        for (name, r) in [("eta_minus", self.eta_minus), ("eta_plus", self.eta_plus)] {
            if let MarginRule::Scaled { factor } = r {
                if !(factor > 0.0) {
                    return Err(Error::Config(format!("{name} factor must be positive")));
                }
            }
        }
        if self.eta_minus == MarginRule::Zero && self.eta_plus == MarginRule::Zero {
            return Err(Error::Config("at least one margin must be positive".into()));
        }
        Ok(())
    }

    /// The strictly decreasing ε levels.
    pub fn epsilons(&self) -> Vec<f64> {
        (0..self.levels).map(|k| self.eps0 * self.ratio.powi(k as i32)).collect()
    }

    /// (η⁻(ε), η⁺(ε)).
    pub fn margins(&self, eps: f64) -> (f64, f64) {
        (self.eta_minus.apply(eps), self.eta_plus.apply(eps))
    }

    /// Largest margin used anywhere in the schedule.
    pub fn max_margin(&self) -> f64 {
        let (a, b) = self.margins(self.eps0);
        a.max(b)
    }
}

/// Start of a conditioned path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Anchor {
    Interior(f64),
    OnLower,
    OnUpper,
}

/// End of a conditioned path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum EndAnchor {
    Interior(f64),
    OnLower,
    OnUpper,
    Free,
}

/// One of the seven anchor combinations (i)–(vii).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryCase {
    pub start: Anchor,
    pub end: EndAnchor,
}

impl BoundaryCase {
    pub fn housemoving() -> Self {
        Self { start: Anchor::OnLower, end: EndAnchor::OnUpper }
    }

    pub fn meander() -> Self {
        Self { start: Anchor::OnLower, end: EndAnchor::Free }
    }

    /// Roman-numeral label of the case.
    pub fn label(&self) -> &'static str {
        use Anchor as A;
        use EndAnchor as E;
        match (self.start, self.end) {
            (A::Interior(_), E::Interior(_)) => "i",
            (A::OnLower | A::OnUpper, E::Interior(_)) => "ii",
            (A::Interior(_), E::OnLower | E::OnUpper) => "iii",
            (A::OnLower, E::OnLower) | (A::OnUpper, E::OnUpper) => "iv",
            (A::OnLower, E::OnUpper) | (A::OnUpper, E::OnLower) => "v",
            (A::Interior(_), E::Free) => "vi",
            (_, E::Free) => "vii",
        }
    }

    /// True when some anchor sits on a wall, so the ε-schedule matters.
    pub fn touches_boundary(&self) -> bool {
        !matches!(self.start, Anchor::Interior(_)) || matches!(self.end, EndAnchor::OnLower | EndAnchor::OnUpper)
    }

    pub fn start_value(&self, k: &Corridor, t: f64) -> f64 {
        match self.start {
            Anchor::Interior(a) => a,
            Anchor::OnLower => k.lo(t),
            Anchor::OnUpper => k.hi(t),
        }
    }

    /// Pinned end value, or None for a free end.
    pub fn end_value(&self, k: &Corridor, t: f64) -> Option<f64> {
        match self.end {
            EndAnchor::Interior(b) => Some(b),
            EndAnchor::OnLower => Some(k.lo(t)),
            EndAnchor::OnUpper => Some(k.hi(t)),
            EndAnchor::Free => None,
        }
    }

    /// Interior anchors must lie strictly inside the corridor.
    pub fn validate(&self, k: &Corridor, t_start: f64, t_end: f64) -> Result<()> {
        if let Anchor::Interior(a) = self.start {
            if !(a > k.lo(t_start) && a < k.hi(t_start)) {
                return Err(Error::Domain(format!("interior start {a} not strictly inside the corridor at t = {t_start}")));
            }
        }
        if let EndAnchor::Interior(b) = self.end {
            if !(b > k.lo(t_end) && b < k.hi(t_end)) {
                return Err(Error::Domain(format!("interior end {b} not strictly inside the corridor at t = {t_end}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schedule_is_decreasing() {
        let k = Corridor::flat(0.0, 1.0).unwrap();
        let s = EpsilonSchedule::default_for(&k);
        s.validate().unwrap();
        let e = s.epsilons();
        assert_eq!(e.len(), 5);
        assert!((e[0] - 0.2).abs() < 1e-15);
        assert!(e.windows(2).all(|w| w[1] < w[0]));
        let wide = Corridor::flat(0.0, 1e6).unwrap();
        assert!((EpsilonSchedule::default_for(&wide).eps0 - 0.2).abs() < 1e-15);
    }

    #[test]
    fn case_labels() {
        use Anchor::*;
        let c = |s, e| BoundaryCase { start: s, end: e }.label();
        assert_eq!(c(Interior(0.5), EndAnchor::Interior(0.5)), "i");
        assert_eq!(c(OnLower, EndAnchor::Interior(0.5)), "ii");
        assert_eq!(c(Interior(0.5), EndAnchor::OnUpper), "iii");
        assert_eq!(c(OnLower, EndAnchor::OnLower), "iv");
        assert_eq!(c(OnLower, EndAnchor::OnUpper), "v");
        assert_eq!(c(Interior(0.5), EndAnchor::Free), "vi");
        assert_eq!(c(OnLower, EndAnchor::Free), "vii");
    }
}
