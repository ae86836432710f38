//! TOML run configuration.

use crate::conditioned::{BoundaryCase, EpsilonSchedule};
use crate::corridor::{Corridor, Curve, TimeGrid};
use crate::drift::{lamperti_transform, DriftModel, ScaleMap, SdeModel};
use crate::error::{Error, Result};
use crate::reweighting::TableSettings;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorridorConfig {
    pub lower: Curve,
    pub upper: Curve,
    #[serde(default)]
    pub t_start: f64,
    #[serde(default = "one")]
    pub t_end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_steps: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n_steps: 512 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMethod {
    /// ε-schedule with SMC at every level.
    Smc,
    /// ε-schedule with rejection at every level (Brownian only).
    Rejection,
    /// Weighted ε = 0 sampler (house-moving and corridor meander only).
    Limit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub paths: usize,
    pub case: BoundaryCase,
    pub method: SampleMethod,
    pub resample_threshold: f64,
    pub max_attempts: u64,
    pub probes: Vec<f64>,
    /// Write every `stride`-th grid node to paths.csv.
    pub stride: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            paths: 1000,
            case: BoundaryCase::housemoving(),
            method: SampleMethod::Smc,
            resample_threshold: 0.5,
            max_attempts: 10_000_000,
            probes: vec![0.25, 0.5, 0.75],
            stride: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityTarget {
    H,
    HMu,
    K,
    KMu,
    QUp,
    QDown,
    P,
}

impl DensityTarget {
    pub fn name(&self) -> &'static str {
        match self {
            DensityTarget::H => "h",
            DensityTarget::HMu => "h_mu",
            DensityTarget::K => "k",
            DensityTarget::KMu => "k_mu",
            DensityTarget::QUp => "q_up",
            DensityTarget::QDown => "q_down",
            DensityTarget::P => "p",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "h" => DensityTarget::H,
            "h_mu" => DensityTarget::HMu,
            "k" => DensityTarget::K,
            "k_mu" => DensityTarget::KMu,
            "q_up" => DensityTarget::QUp,
            "q_down" => DensityTarget::QDown,
            "p" => DensityTarget::P,
            _ => return Err(Error::Config(format!("unknown density target `{s}` (h, h_mu, k, k_mu, q_up, q_down, p)"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    pub target: DensityTarget,
    /// Time of the one-time densities.
    pub t: f64,
    /// (t1, y1) for the transition densities; house-moving targets become
    /// h(t1, y1, t, ·) when set, and `p` requires it.
    pub start: Option<[f64; 2]>,
    /// End of the corridor meander; defaults to the corridor end.
    pub t_end: Option<f64>,
    pub steps: usize,
    pub paths: usize,
    pub nodes: usize,
    pub min_ess: f64,
}

impl Default for DensityConfig {
    fn default() -> Self {
        let s = TableSettings::default();
        Self { target: DensityTarget::H, t: 0.5, start: None, t_end: None, steps: s.steps, paths: s.paths, nodes: s.nodes, min_ess: s.min_ess }
    }
}

impl DensityConfig {
    pub fn settings(&self) -> TableSettings {
        TableSettings { steps: self.steps, paths: self.paths, nodes: self.nodes, min_ess: self.min_ess }
    }
}

/// Sizes and parameters of the verification suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Paths for ensemble-level tests.
    pub paths: usize,
    /// Grid steps on [0, 1] for path tests.
    pub steps: usize,
    /// Per-node sizes for table-based tests.
    pub table_paths: usize,
    pub table_nodes: usize,
    pub table_steps: usize,
    pub min_ess: f64,
    pub girsanov_window: f64,
    /// A = corridor widened by this fraction of its minimum width on each side.
    pub girsanov_event_margin: f64,
    pub ck_times: [f64; 3],
    pub decomposition_splits: Vec<f64>,
    pub reversal_time: f64,
    pub avoidance_time: f64,
    /// None selects τ = 2√Δ.
    pub avoidance_tolerance: Option<f64>,
    pub moment_orders: Vec<u32>,
    pub holder_levels: [u32; 2],
    pub rn_time: f64,
    pub rn_probes: usize,
    pub bessel_time: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            paths: 10_000,
            steps: 1024,
            table_paths: 4000,
            table_nodes: 32,
            table_steps: 384,
            min_ess: 10.0,
            girsanov_window: 0.02,
            girsanov_event_margin: 0.2,
            ck_times: [0.25, 0.5, 0.75],
            decomposition_splits: vec![1.0 / 3.0, 2.0 / 3.0],
            reversal_time: 0.25,
            avoidance_time: 0.5,
            avoidance_tolerance: Some(0.0),
            moment_orders: vec![1, 2, 3],
            holder_levels: [4, 10],
            rn_time: 0.5,
            rn_probes: 100,
            bessel_time: 0.5,
        }
    }
}

impl VerifyConfig {
    pub fn table_settings(&self) -> TableSettings {
        TableSettings { steps: self.table_steps, paths: self.table_paths, nodes: self.table_nodes, min_ess: self.min_ess }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one_usize")]
    pub workers: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    pub corridor: CorridorConfig,
    #[serde(default)]
    pub drift: Option<DriftModel>,
    /// dU = ν dt + σ dW; the corridor is then given in U-coordinates.
    #[serde(default)]
    pub sde: Option<SdeModel>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub schedule: Option<EpsilonSchedule>,
    #[serde(default)]
    pub sample: SampleConfig,
    #[serde(default)]
    pub density: DensityConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// A validated configuration in unit-diffusion coordinates.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub corridor: Corridor,
    pub drift: DriftModel,
    /// Scale map when the config was given as an SDE.
    pub map: Option<ScaleMap>,
    pub grid: TimeGrid,
    pub schedule: EpsilonSchedule,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Ok((Self::from_toml(&text)?, text))
    }

    /// Check every field against the module preconditions and transform an
    /// SDE configuration to unit diffusion.
    pub fn resolve(&self) -> Result<Resolved> {
        let cfg = |e: Error| match e {
            Error::Config(m) => Error::Config(m),
            other => Error::Config(other.to_string()),
        };
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.drift.is_some() && self.sde.is_some() {
            return Err(Error::Config("give either `drift` or `sde`, not both".into()));
        }
        let c = &self.corridor;
        let (lower, upper, drift, map) = match &self.sde {
            Some(m) => {
                let tr = lamperti_transform(m).map_err(cfg)?;
                let n = 4 * self.grid.n_steps.max(64);
                (tr.map.transform_curve(&c.lower, n), tr.map.transform_curve(&c.upper, n), tr.drift, Some(tr.map))
            }
            None => (c.lower.clone(), c.upper.clone(), self.drift.clone().unwrap_or_default(), None),
        };
        drift.validate().map_err(cfg)?;
        let corridor = Corridor::new(lower, upper, c.t_start, c.t_end).map_err(cfg)?;
        let grid = TimeGrid::new(c.t_start, c.t_end, self.grid.n_steps).map_err(cfg)?;
        let schedule = self.schedule.clone().unwrap_or_else(|| EpsilonSchedule::default_for(&corridor));
        schedule.validate().map_err(cfg)?;

        let s = &self.sample;
        if s.paths == 0 || s.stride == 0 {
            return Err(Error::Config("sample.paths and sample.stride must be positive".into()));
        }
        if !(0.0..=1.0).contains(&s.resample_threshold) {
            return Err(Error::Config("sample.resample_threshold must lie in [0, 1]".into()));
        }
        s.case.validate(&corridor, c.t_start, c.t_end).map_err(cfg)?;
        if let Some(t) = s.probes.iter().find(|&&t| grid.index_of(t).is_none()) {
            return Err(Error::Config(format!("sample.probes: {t} is not a grid node")));
        }
        let d = &self.density;
        if d.paths < 2 || d.nodes < 2 || d.steps < 2 {
            return Err(Error::Config("density.paths, density.nodes and density.steps must be at least 2".into()));
        }
        let v = &self.verify;
        if v.paths < 2 || v.table_paths < 2 || v.table_nodes < 2 || v.steps < 2 || v.table_steps < 2 {
            return Err(Error::Config("verify sizes must be at least 2".into()));
        }
        if v.holder_levels[0] >= v.holder_levels[1] {
            return Err(Error::Config("verify.holder_levels must be increasing".into()));
        }
        Ok(Resolved { corridor, drift, map, grid, schedule })
    }
}

/// SHA-256 of the config text, hex encoded.
pub fn config_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 7

[corridor]
lower = { kind = "constant", value = 0.0 }
upper = { kind = "constant", value = 1.0 }
"#;

    #[test]
    fn minimal_config_resolves() {
        let c = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.workers, 1);
        let r = c.resolve().unwrap();
        assert!(r.corridor.is_flat());
        assert_eq!(r.drift, DriftModel::Zero);
        assert_eq!(r.grid.n_steps(), 512);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = format!("{MINIMAL}\nbogus = 1\n");
        assert!(matches!(RunConfig::from_toml(&text), Err(Error::Config(_))));
        let text = MINIMAL.replace("value = 1.0", "value = 1.0, slope = 2.0");
        assert!(RunConfig::from_toml(&text).is_err());
    }

    #[test]
    fn crossing_curves_fail_validation() {
        let text = MINIMAL.replace("value = 1.0", "value = -1.0");
        let err = RunConfig::from_toml(&text).unwrap().resolve().unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err:?}");
    }

    #[test]
    fn drift_and_sde_are_exclusive() {
        let text = format!("{MINIMAL}\n[drift]\nkind = \"zero\"\n\n[sde]\nnu = [0.0]\nsigma = [1.0]\nrange = [-1.0, 2.0]\n");
        assert!(RunConfig::from_toml(&text).unwrap().resolve().is_err());
    }

    #[test]
    fn sde_config_is_transformed() {
        let text = format!("{MINIMAL}\n[sde]\nnu = [1.0]\nsigma = [2.0]\nrange = [-1.0, 2.0]\n");
        let r = RunConfig::from_toml(&text).unwrap().resolve().unwrap();
        assert_eq!(r.drift, DriftModel::Constant { c: 0.5 });
        assert!((r.corridor.hi(0.3) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(config_hash("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
