//! Experiment configuration: a versioned TOML document.
//!
//! ```toml
//! version = 1
//! name = "wsr_vs_ps1"
//! mode = "wsr_fixed"
//! trials = 200
//! base_seed = 1
//! methods = ["joint_flexible", "joint_fixed", "rbot", "obrt", "rbrt"]
//!
//! [params]
//! p_s2 = 0.2
//!
//! [topology]
//! kind = "standard"
//!
//! [sweep]
//! variable = "p_s1"
//! values = { start = 0.5, stop = 4.0, points = 8 }
//! ```
//!
//! Omitted parameter fields take the defaults of the numerical study.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::Scheme;
use crate::channel::{figure_topology_with_exponent, Topology};
use crate::conic::Tolerances;
use crate::error::{Error, Result};
use crate::problems::ProblemKind;
use crate::sysmodel::SystemParams;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    WsrFixed,
    WsrFlexible,
    MinPower,
}

impl Mode {
    pub fn kind(self) -> ProblemKind {
        match self {
            Mode::WsrFixed => ProblemKind::P1,
            Mode::WsrFlexible => ProblemKind::P2,
            Mode::MinPower => ProblemKind::P3,
        }
    }

    pub fn metric_name(self) -> &'static str {
        match self {
            Mode::MinPower => "average power (W)",
            _ => "weighted sum rate (bit/s/Hz)",
        }
    }
}

/// A scheme evaluated on every trial.
///
/// `joint` solves the configured mode; `joint_fixed` and `joint_flexible`
/// pin the rate problem regardless of mode. Baselines run in the configured
/// mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Joint,
    JointFixed,
    JointFlexible,
    Rbot,
    Obrt,
    Rbrt,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Joint => "joint",
            Method::JointFixed => "joint_fixed",
            Method::JointFlexible => "joint_flexible",
            Method::Rbot => "rbot",
            Method::Obrt => "obrt",
            Method::Rbrt => "rbrt",
        }
    }

    pub fn baseline(self) -> Option<Scheme> {
        match self {
            Method::Rbot => Some(Scheme::Rbot),
            Method::Obrt => Some(Scheme::Obrt),
            Method::Rbrt => Some(Scheme::Rbrt),
            _ => None,
        }
    }

    pub fn kind(self, mode: Mode) -> ProblemKind {
        match self {
            Method::JointFixed => ProblemKind::P1,
            Method::JointFlexible => ProblemKind::P2,
            _ => mode.kind(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologySpec {
    /// Fixed distances of the main numerical study.
    #[default]
    Standard,
    Distances {
        d_s1d1: f64,
        d_s1r: f64,
        d_s2r: f64,
        d_s2d2: f64,
        d_rd2: f64,
        #[serde(default = "default_exponent")]
        path_loss_exponent: f64,
    },
    /// Planar layout with the relay at `(relay_x, relay_y)`.
    Relay {
        relay_x: f64,
        relay_y: f64,
        #[serde(default = "default_exponent")]
        path_loss_exponent: f64,
    },
}

fn default_exponent() -> f64 {
    4.0
}

impl TopologySpec {
    pub fn resolve(&self) -> Result<Topology> {
        match *self {
            TopologySpec::Standard => Ok(Topology::standard()),
            TopologySpec::Distances { d_s1d1, d_s1r, d_s2r, d_s2d2, d_rd2, path_loss_exponent } => {
                Topology::new(d_s1d1, d_s1r, d_s2r, d_s2d2, d_rd2, path_loss_exponent)
            }
            TopologySpec::Relay { relay_x, relay_y, path_loss_exponent } => {
                figure_topology_with_exponent(relay_x, relay_y, path_loss_exponent)
            }
        }
    }

    pub fn path_loss_exponent(&self) -> f64 {
        match *self {
            TopologySpec::Standard => Topology::standard().path_loss_exponent(),
            TopologySpec::Distances { path_loss_exponent, .. } | TopologySpec::Relay { path_loss_exponent, .. } => {
                path_loss_exponent
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    PS1,
    PS2,
    RS1,
    RS2,
    Antennas,
    /// Relay position over a rectangular grid; replaces the topology.
    RelayGrid,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::PS1 => "p_s1",
            SweepVar::PS2 => "p_s2",
            SweepVar::RS1 => "r_s1",
            SweepVar::RS2 => "r_s2",
            SweepVar::Antennas => "antennas",
            SweepVar::RelayGrid => "relay_grid",
        }
    }
}

/// Either an explicit list or `points` evenly spaced values from `start` to
/// `stop` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    List(Vec<f64>),
    Range { start: f64, stop: f64, points: usize },
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Axis::List(v) => v.clone(),
            Axis::Range { start, stop, points } => match *points {
                0 => Vec::new(),
                1 => vec![*start],
                n => (0..n).map(|i| tidy(start + (stop - start) * i as f64 / (n - 1) as f64)).collect(),
            },
        }
    }
}

/// Rounds to 12 significant digits so that generated values print as the
/// decimals they stand for (0.3, not 0.30000000000000004).
fn tidy(x: f64) -> f64 {
    format!("{x:.11e}").parse().unwrap_or(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: SweepVar,
    /// Sweep values; the relay x coordinates for `relay_grid`.
    pub values: Axis,
    /// Relay y coordinates, only for `relay_grid`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_values: Option<Axis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// File stem; defaults to the experiment name.
    pub stem: Option<String>,
    pub plot: bool,
    /// Also write one line per trial and method.
    pub trial_log: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: PathBuf::from("results"), stem: None, plot: true, trial_log: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub name: String,
    pub mode: Mode,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub params: SystemParams,
    #[serde(default)]
    pub topology: TopologySpec,
    pub sweep: SweepSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_trials() -> usize {
    200
}

/// One point of a sweep, already resolved into parameters and topology.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    /// Value written to the `sweep_value` column.
    pub label: String,
    /// Numeric coordinates: one value, or `(x, y)` for the relay grid.
    pub coords: Vec<f64>,
    pub params: SystemParams,
    pub topology: Topology,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.version != CONFIG_VERSION {
            return bad(format!("unsupported config version {}, expected {CONFIG_VERSION}", self.version));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("no methods requested".into());
        }
        if self.mode == Mode::MinPower
            && self.methods.iter().any(|m| matches!(m, Method::JointFixed | Method::JointFlexible))
        {
            return bad("joint_fixed and joint_flexible apply to the rate modes only".into());
        }
        self.params.validate()?;
        self.topology.resolve()?;
        let xs = self.sweep.values.values();
        if xs.is_empty() {
            return bad("sweep range is empty".into());
        }
        if xs.iter().any(|x| !x.is_finite()) {
            return bad("sweep values must be finite".into());
        }
        match (self.sweep.variable, &self.sweep.y_values) {
            (SweepVar::RelayGrid, None) => return bad("relay_grid needs y_values".into()),
            (SweepVar::RelayGrid, Some(y)) if y.values().is_empty() => return bad("relay y range is empty".into()),
            (SweepVar::RelayGrid, Some(_)) => {}
            (v, Some(_)) => return bad(format!("y_values only applies to relay_grid, not {}", v.name())),
            _ => {}
        }
        if self.sweep.variable == SweepVar::Antennas && xs.iter().any(|&x| x < 1.0 || x.fract() != 0.0) {
            return bad("antenna counts must be positive integers".into());
        }
        if self.points()?.is_empty() {
            return bad("no valid sweep point".into());
        }
        Ok(())
    }

    /// Resolved sweep points in sweep order.
    ///
    /// Relay positions that coincide with a node are skipped.
    pub fn points(&self) -> Result<Vec<SweepPoint>> {
        let base_topo = self.topology.resolve()?;
        let xs = self.sweep.values.values();
        let mut out = Vec::new();
        if self.sweep.variable == SweepVar::RelayGrid {
            let beta = self.topology.path_loss_exponent();
            let ys = self.sweep.y_values.as_ref().map(Axis::values).unwrap_or_default();
            for &x in &xs {
                for &y in &ys {
                    if let Ok(topology) = figure_topology_with_exponent(x, y, beta) {
                        out.push(SweepPoint {
                            label: format!("{x}:{y}"),
                            coords: vec![x, y],
                            params: self.params.clone(),
                            topology,
                        });
                    }
                }
            }
            return Ok(out);
        }
        for &x in &xs {
            let mut params = self.params.clone();
            match self.sweep.variable {
                SweepVar::PS1 => params.p_s1 = x,
                SweepVar::PS2 => params.p_s2 = x,
                SweepVar::RS1 => params.r_s1 = x,
                SweepVar::RS2 => params.r_s2 = x,
                SweepVar::Antennas => params.antennas = x as usize,
                SweepVar::RelayGrid => unreachable!(),
            }
            params.validate()?;
            out.push(SweepPoint { label: format!("{x}"), coords: vec![x], params, topology: base_topo });
        }
        Ok(out)
    }

    /// Relay cells of the grid that were skipped because the relay would sit
    /// on a node.
    pub fn skipped_cells(&self) -> Vec<(f64, f64)> {
        if self.sweep.variable != SweepVar::RelayGrid {
            return Vec::new();
        }
        let beta = self.topology.path_loss_exponent();
        let ys = self.sweep.y_values.as_ref().map(Axis::values).unwrap_or_default();
        let mut out = Vec::new();
        for x in self.sweep.values.values() {
            for &y in &ys {
                if figure_topology_with_exponent(x, y, beta).is_err() {
                    out.push((x, y));
                }
            }
        }
        out
    }

    /// SHA-256 of the canonical JSON form, ignoring output settings so that
    /// the same experiment hashes equally wherever it is written.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputSpec::default();
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn stem(&self) -> &str {
        self.output.stem.as_deref().unwrap_or(&self.name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
        version = 1
        name = "demo"
        mode = "wsr_flexible"
        trials = 3
        methods = ["joint", "rbot"]
        [params]
        p_s1 = 1.5
        [sweep]
        variable = "p_s2"
        values = { start = 0.1, stop = 0.4, points = 4 }
    "#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(cfg.params.p_s1, 1.5);
        assert_eq!(cfg.params.antennas, 4);
        assert_eq!(cfg.topology, TopologySpec::Standard);
        let pts = cfg.points().unwrap();
        assert_eq!(pts.len(), 4);
        assert!((pts[3].params.p_s2 - 0.4).abs() < 1e-15);
        assert_eq!(pts[2].label, "0.3");
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn rejects_bad_configs() {
        for (from, to) in [
            ("version = 1", "version = 2"),
            ("trials = 3", "trials = 0"),
            ("points = 4", "points = 0"),
            ("p_s1 = 1.5", "p_s1 = -1.0"),
            ("p_s1 = 1.5", "p_s9 = 1.0"),
            ("mode = \"wsr_flexible\"", "mode = \"min_power\"\nmethods_x = 1"),
        ] {
            assert!(ExperimentConfig::from_toml(&SAMPLE.replace(from, to)).is_err(), "{to}");
        }
        let fixed_in_power = SAMPLE.replace("wsr_flexible", "min_power").replace("\"joint\"", "\"joint_fixed\"");
        assert!(ExperimentConfig::from_toml(&fixed_in_power).is_err());
    }

    #[test]
    fn relay_grid_skips_node_positions() {
        let text = SAMPLE.replace(
            "variable = \"p_s2\"\n        values = { start = 0.1, stop = 0.4, points = 4 }",
            "variable = \"relay_grid\"\n        values = [9.0, 10.0]\n        y_values = [0.0, 1.0]",
        );
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.points().unwrap().len(), 3);
        assert_eq!(cfg.skipped_cells(), vec![(10.0, 0.0)]);
    }

    #[test]
    fn hash_ignores_output_location() {
        let mut cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        let h = cfg.hash();
        cfg.output.dir = PathBuf::from("/elsewhere");
        assert_eq!(cfg.hash(), h);
        cfg.trials = 4;
        assert_ne!(cfg.hash(), h);
    }
}
