//! Experiment configuration: a TOML file whose top-level keys mirror the
//! common command-line flags, plus one optional table per experiment kind.

use std::fmt;
use std::path::{Path, PathBuf};

use ealab::chaos::default_t_grid;
use ealab::experiment::{Disorder, Setup};
use ealab::groundstate::{BoundaryCondition, Method};
use ealab::lattice::Topology;
use ealab::variance::{cylinder, ReplicaEnsemble};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{RunError, RunResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Gs,
    Droplet,
    Chaos,
    Variance,
    Stiffness,
    Window,
    Selftest,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Gs => "gs",
            Self::Droplet => "droplet",
            Self::Chaos => "chaos",
            Self::Variance => "variance",
            Self::Stiffness => "stiffness",
            Self::Window => "window",
            Self::Selftest => "selftest",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_n_real")]
    pub n_real: usize,
    /// Worker threads; 0 uses all cores. Excluded from the config hash.
    #[serde(default)]
    pub workers: usize,
    /// Output directory. Excluded from the config hash.
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(rename = "L", default = "default_sizes")]
    pub sizes: Vec<usize>,
    /// `open`, `periodic`, `cylinder` or a per-axis list; defaults per kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<String>,
    /// `natural`, `free`, `periodic` or `antiperiodic:<axis>`.
    #[serde(default = "default_bc")]
    pub bc: String,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default)]
    pub disorder: Disorder,
    #[serde(default)]
    pub gs: GsSection,
    #[serde(default)]
    pub chaos: ChaosSection,
    #[serde(default)]
    pub variance: VarianceSection,
    #[serde(default)]
    pub stiffness: StiffnessSection,
    #[serde(default)]
    pub window: WindowSection,
    #[serde(default)]
    pub selftest: SelftestSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GsSection {
    /// Largest connected cluster checked by the ground-state criterion.
    pub criterion_k: usize,
    /// Re-solve by enumeration wherever it is feasible and compare.
    pub cross_check: bool,
    /// Write every sampled coupling field in the binary format.
    pub save_couplings: bool,
    /// Solve this coupling file (`.csv` or binary) instead of sampling.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub couplings: Option<PathBuf>,
}

impl Default for GsSection {
    fn default() -> Self {
        Self { criterion_k: 4, cross_check: true, save_couplings: false, couplings: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChaosSection {
    /// Defaults to `0` plus 25 log-spaced points in `[1e-6, 10]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<f64>>,
    pub eps: f64,
    pub deltas: Vec<f64>,
    pub droplets: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub droplet_n_real: Option<usize>,
    pub flexibility: bool,
    /// Box size of the flexibility histogram; defaults to the first size.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flexibility_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flexibility_n_real: Option<usize>,
    /// Sizes of a stiffness scan feeding the relation report; empty skips it.
    pub stiffness_sizes: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stiffness_n_real: Option<usize>,
    /// Realizations per size checked against the drift-bound window; 0 skips it.
    pub zero_window_n_real: usize,
}

impl Default for ChaosSection {
    fn default() -> Self {
        Self {
            t_grid: None,
            eps: 0.05,
            deltas: vec![0.05, 0.1, 0.2],
            droplets: true,
            droplet_n_real: None,
            flexibility: true,
            flexibility_size: None,
            flexibility_n_real: None,
            stiffness_sizes: Vec::new(),
            stiffness_n_real: None,
            zero_window_n_real: 0,
        }
    }
}

impl ChaosSection {
    pub fn grid(&self) -> Vec<f64> {
        self.t_grid.clone().unwrap_or_else(default_t_grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VarianceSection {
    /// `ff`, `pa`, `pa:<axis>` or `identical`.
    pub ensemble: String,
    pub t: f64,
    /// Points of the `s` grid: `0` plus log-spaced points up to `t`.
    pub s_points: usize,
    /// Also run the single-edge bound on this edge.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edge: Option<usize>,
}

impl Default for VarianceSection {
    fn default() -> Self {
        Self { ensemble: "ff".into(), t: 0.5, s_points: 25, edge: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct StiffnessSection {
    /// Axis along which the antiperiodic replica flips the wrap couplings.
    pub axis: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowSection {
    /// Windows as lists of edge indices; each must be acyclic.
    pub windows: Vec<Vec<usize>>,
    /// Horizon of the window interpolation paths.
    pub t_max: f64,
    /// Edges followed along the whole-box path by the stability scan.
    pub stability_edges: Vec<usize>,
    pub dt: f64,
    /// End of the stability scan and of the drift check, at most 1.
    pub t_stability: f64,
    pub drift_points: usize,
}

impl Default for WindowSection {
    fn default() -> Self {
        Self {
            windows: vec![vec![0], vec![0, 1]],
            t_max: 10.0,
            stability_edges: vec![0],
            dt: 1e-3,
            t_stability: 1.0,
            drift_points: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelftestSection {
    /// Monte Carlo samples per Gaussian identity check.
    pub samples: usize,
    /// Dimension of the Gaussian vector.
    pub n: usize,
    /// Random instances per solver cross-check shape.
    pub instances: usize,
    /// Box shapes of the solver cross-check.
    pub shapes: Vec<Vec<usize>>,
    pub criterion_k: usize,
    /// Configuration triples per size for the overlap-distance check.
    pub triples: usize,
}

impl Default for SelftestSection {
    fn default() -> Self {
        Self {
            samples: 100_000,
            n: 4,
            instances: 200,
            shapes: vec![vec![3, 3], vec![4, 4], vec![4, 5]],
            criterion_k: 4,
            triples: 10_000,
        }
    }
}

fn default_seed() -> u64 {
    1
}

fn default_n_real() -> usize {
    100
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_d() -> usize {
    2
}

fn default_sizes() -> Vec<usize> {
    vec![4]
}

fn default_bc() -> String {
    "natural".into()
}

fn default_method() -> Method {
    Method::Auto
}

/// Command-line values that replace the matching config keys.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub d: Option<usize>,
    pub sizes: Option<Vec<usize>>,
    pub topology: Option<String>,
    pub n_real: Option<usize>,
}

fn field(name: &str, reason: impl Into<String>) -> RunError {
    RunError::Config { field: name.into(), reason: reason.into() }
}

impl ExperimentConfig {
    /// Defaults for `kind`.
    pub fn new(kind: Kind) -> Self {
        let mut table = toml::Table::new();
        table.insert("kind".into(), toml::Value::String(kind.to_string()));
        Self::from_table(table).expect("defaults are valid")
    }

    /// Reads a config file; a `kind` key, when present, must match `kind`.
    pub fn load(path: &Path, kind: Kind, overrides: &Overrides) -> RunResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
        Self::parse(&text, kind, overrides)
    }

    pub fn parse(text: &str, kind: Kind, overrides: &Overrides) -> RunResult<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| field("<file>", e.to_string()))?;
        match table.get("kind") {
            None => {
                table.insert("kind".into(), toml::Value::String(kind.to_string()));
            }
            Some(toml::Value::String(k)) if *k == kind.to_string() => {}
            Some(other) => return Err(field("kind", format!("config declares {other} but the command is `{kind}`"))),
        }
        let mut config = Self::from_table(table)?;
        config.apply(overrides);
        config.validate()?;
        Ok(config)
    }

    fn from_table(table: toml::Table) -> RunResult<Self> {
        toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| field("<file>", e.message().to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = &o.out {
            self.out = v.clone();
        }
        if let Some(v) = o.workers {
            self.workers = v;
        }
        if let Some(v) = o.d {
            self.d = v;
        }
        if let Some(v) = &o.sizes {
            self.sizes = v.clone();
        }
        if let Some(v) = &o.topology {
            self.topology = Some(v.clone());
        }
        if let Some(v) = o.n_real {
            self.n_real = v;
        }
    }

    /// Topology written out in full: the kind's default when unset.
    pub fn resolved_topology(&self) -> String {
        if let Some(t) = &self.topology {
            return t.clone();
        }
        match self.kind {
            Kind::Stiffness => "cylinder".into(),
            Kind::Variance if self.variance.ensemble.starts_with("pa") => "periodic".into(),
            _ => "open".into(),
        }
    }

    pub fn topology(&self) -> RunResult<Topology> {
        let s = self.resolved_topology();
        if s == "cylinder" {
            return Ok(cylinder(self.d));
        }
        Topology::parse(&s, self.d).map_err(|e| field("topology", e.to_string()))
    }

    pub fn boundary_condition(&self, topology: &Topology) -> RunResult<BoundaryCondition> {
        let bc = match self.bc.as_str() {
            "natural" if topology.is_fully_open() => BoundaryCondition::Free,
            "natural" | "periodic" => BoundaryCondition::Periodic,
            "free" => BoundaryCondition::Free,
            other => match other.strip_prefix("antiperiodic:").map(str::parse::<usize>) {
                Some(Ok(axis)) => BoundaryCondition::Antiperiodic { axis },
                _ => return Err(field("bc", format!("unknown boundary condition `{other}`"))),
            },
        };
        Ok(bc)
    }

    pub fn ensemble(&self) -> RunResult<ReplicaEnsemble> {
        let e = self.variance.ensemble.as_str();
        Ok(match e {
            "ff" => ReplicaEnsemble::Ff,
            "identical" => ReplicaEnsemble::Identical,
            "pa" => ReplicaEnsemble::Pa { axis: 0 },
            _ => match e.strip_prefix("pa:").map(str::parse::<usize>) {
                Some(Ok(axis)) => ReplicaEnsemble::Pa { axis },
                _ => return Err(field("variance.ensemble", format!("unknown ensemble `{e}`"))),
            },
        })
    }

    /// Lattice family of the main experiment.
    pub fn setup(&self) -> RunResult<Setup> {
        let topology = self.topology()?;
        let bc = self.boundary_condition(&topology)?;
        Ok(Setup { d: self.d, topology, bc, method: self.method, disorder: self.disorder, workers: self.workers })
    }

    /// Checks every field that the experiments would otherwise reject late.
    pub fn validate(&self) -> RunResult<()> {
        if self.d == 0 {
            return Err(field("d", "must be at least 1"));
        }
        if self.sizes.is_empty() {
            return Err(field("L", "needs at least one size"));
        }
        if let Some(l) = self.sizes.iter().find(|&&l| l < 2) {
            return Err(field("L", format!("size {l} is below 2")));
        }
        if self.sizes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(field("L", "sizes must be strictly increasing"));
        }
        if self.n_real == 0 {
            return Err(field("n_real", "must be positive"));
        }
        let setup = self.setup()?;
        if self.kind != Kind::Selftest && self.kind != Kind::Variance {
            for &l in &self.sizes {
                setup.lattice(l).map_err(|e| field("bc", e.to_string()))?;
            }
        }
        match self.kind {
            Kind::Gs => {
                if !(1..=ealab::groundstate::MAX_SUBSET).contains(&self.gs.criterion_k) {
                    return Err(field("gs.criterion_k", format!("must lie in 1..={}", ealab::groundstate::MAX_SUBSET)));
                }
            }
            Kind::Chaos => {
                let grid = self.chaos.grid();
                if grid.is_empty() || grid.iter().any(|t| !t.is_finite() || *t < 0.0) || grid.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(field("chaos.t_grid", "must be non-empty, non-negative and strictly increasing"));
                }
                if !grid.iter().any(|&t| t > 0.0) {
                    return Err(field("chaos.t_grid", "needs a positive point"));
                }
                if !(self.chaos.eps > 0.0 && self.chaos.eps <= 1.0) {
                    return Err(field("chaos.eps", "must lie in (0, 1]"));
                }
                if self.chaos.deltas.iter().any(|d| !(*d > 0.0)) {
                    return Err(field("chaos.deltas", "must be positive"));
                }
                if let Some(l) = self.chaos.flexibility_size {
                    setup.lattice(l).map_err(|e| field("chaos.flexibility_size", e.to_string()))?;
                }
                if self.chaos.stiffness_n_real.unwrap_or(self.n_real) < 3 && !self.chaos.stiffness_sizes.is_empty() {
                    return Err(field("chaos.stiffness_n_real", "must be at least 3"));
                }
            }
            Kind::Variance => {
                self.ensemble()?;
                if !(self.variance.t > 0.0 && self.variance.t.is_finite()) {
                    return Err(field("variance.t", "must be positive"));
                }
                if self.variance.s_points < 2 {
                    return Err(field("variance.s_points", "needs at least 2 points"));
                }
                if self.n_real < 2 {
                    return Err(field("n_real", "variance needs at least 2 realizations"));
                }
            }
            Kind::Stiffness => {
                if self.n_real < 3 {
                    return Err(field("n_real", "stiffness needs at least 3 realizations"));
                }
                if !setup.topology.is_periodic(self.stiffness.axis) {
                    return Err(field("stiffness.axis", format!("axis {} is not periodic", self.stiffness.axis)));
                }
            }
            Kind::Window => {
                let w = &self.window;
                if w.windows.iter().any(|x| x.is_empty() || x.len() > ealab::excitation::MAX_WINDOW_EDGES) {
                    return Err(field(
                        "window.windows",
                        format!("each window needs 1 to {} edges", ealab::excitation::MAX_WINDOW_EDGES),
                    ));
                }
                if !(w.t_max > 0.0 && w.t_max <= 50.0) {
                    return Err(field("window.t_max", "must lie in (0, 50]"));
                }
                if !(w.t_stability > 0.0 && w.t_stability <= 1.0) {
                    return Err(field("window.t_stability", "must lie in (0, 1]"));
                }
                if !(w.dt > 0.0 && w.dt <= w.t_stability) {
                    return Err(field("window.dt", "must lie in (0, t_stability]"));
                }
                if w.drift_points < 100 {
                    return Err(field("window.drift_points", "needs at least 100 points"));
                }
            }
            Kind::Selftest => {
                let s = &self.selftest;
                if s.n < 2 {
                    return Err(field("selftest.n", "needs at least 2 coordinates"));
                }
                if s.samples < 2 {
                    return Err(field("selftest.samples", "needs at least 2 samples"));
                }
                if !(1..=ealab::groundstate::MAX_SUBSET).contains(&s.criterion_k) {
                    return Err(field("selftest.criterion_k", format!("must lie in 1..={}", ealab::groundstate::MAX_SUBSET)));
                }
                if s.shapes.iter().any(|dims| dims.len() != 2 || dims.iter().any(|&x| x < 2)) {
                    return Err(field("selftest.shapes", "shapes are two sides, each at least 2"));
                }
            }
            Kind::Droplet => {}
        }
        Ok(())
    }

    /// The config with defaults filled in, minus the execution-only keys
    /// `workers` and `out`.
    fn identity(&self) -> Self {
        let mut c = self.clone();
        c.topology = Some(self.resolved_topology());
        if self.kind == Kind::Chaos {
            c.chaos.t_grid = Some(self.chaos.grid());
        }
        c.workers = 0;
        c.out = PathBuf::new();
        c
    }

    /// SHA-256 over the canonical JSON of the resolved config, ignoring
    /// `workers` and `out`.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self.identity()).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("workers");
            map.remove("out");
        }
        let digest = Sha256::digest(value.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Resolved config as TOML, ignoring `workers` and `out`.
    pub fn resolved_toml(&self) -> String {
        let mut table = toml::Table::try_from(self.identity()).expect("config serializes");
        table.remove("workers");
        table.remove("out");
        toml::to_string(&table).expect("table serializes")
    }
}
