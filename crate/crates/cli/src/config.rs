//! Experiment configuration files (TOML).

use std::fmt;
use std::path::Path;

use gossipfpp::fquad::{FquadGrid, FquadOptions};
use gossipfpp::{EgoDeviation, RewardEstimator, RewardSpec, Strategy, Topology};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A config that cannot be used, with the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl fmt::Display) -> Self {
        Self {
            field: field.into(),
            message: message.to_string(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "field `{}`: {}", self.field, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Simulate,
    Analytic,
    Fquad,
    Lattice,
    Nash,
    Sweep,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Simulate => "simulate",
            Kind::Analytic => "analytic",
            Kind::Fquad => "fquad",
            Kind::Lattice => "lattice",
            Kind::Nash => "nash",
            Kind::Sweep => "sweep",
        }
    }
}

/// Reward family and its parameters, e.g. `family = "top_k"`,
/// `params = [2, 10000]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardConfig {
    pub family: String,
    #[serde(default)]
    pub params: Vec<f64>,
}

impl RewardConfig {
    pub fn spec(&self) -> Result<RewardSpec, ConfigError> {
        RewardSpec::from_tag(&self.family, &self.params).map_err(|e| ConfigError::new("reward", e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateParams {
    /// Quantiles `[lo, hi]` of the receipt-time window.
    pub window: [f64; 2],
    /// Periodic calls instead of exponential clocks (complete graph only).
    pub regular: bool,
    /// Write the receipt table of replicate 0.
    pub receipts: bool,
}

impl Default for SimulateParams {
    fn default() -> Self {
        Self {
            window: [0.1, 0.9],
            regular: false,
            receipts: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "quantity", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnalyticParams {
    NashCg,
    PayoffCurve { theta: f64, phis: Vec<f64> },
    DeviantRank { phi: f64, theta: f64, points: usize },
    FiniteK { n: usize, k: usize },
    Symmetric { theta_asy: f64 },
    Audience { c: f64 },
    RegularCalls { theta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FquadParams {
    pub lambda: f64,
    pub grid: FquadGrid,
    pub options: FquadOptions,
}

impl Default for FquadParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            grid: FquadGrid::default(),
            options: FquadOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeParams {
    pub half_width: i64,
    pub s_max: f64,
    pub replicates: usize,
}

fn default_lambdas() -> Vec<f64> {
    vec![0.5, 0.8, 0.9, 1.0, 1.1, 1.2, 1.5, 2.0]
}

fn default_draws() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case", deny_unknown_fields)]
pub enum LatticeParams {
    Shape {
        half_width: i64,
        s_max: f64,
    },
    Tau {
        r: f64,
    },
    Z {
        r: f64,
        #[serde(default = "default_lambdas")]
        lambdas: Vec<f64>,
        #[serde(default = "default_draws")]
        draws: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shape: Option<ShapeParams>,
    },
    NashNn {
        sides: Vec<usize>,
        r: f64,
        #[serde(default = "default_lambdas")]
        lambdas: Vec<f64>,
        #[serde(default = "default_draws")]
        draws: usize,
        shape: ShapeParams,
    },
    UniformRank {
        side: usize,
    },
}

impl LatticeParams {
    pub fn task(&self) -> &'static str {
        match self {
            LatticeParams::Shape { .. } => "shape",
            LatticeParams::Tau { .. } => "tau",
            LatticeParams::Z { .. } => "z",
            LatticeParams::NashNn { .. } => "nash_nn",
            LatticeParams::UniformRank { .. } => "uniform_rank",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NashMethod {
    #[default]
    FixedPoint,
    BestResponse,
    ShortLong,
    DistanceCost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NashParams {
    pub method: NashMethod,
    /// Trial rates as multiples of the current rate; defaults per method.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multipliers: Option<Vec<f64>>,
    pub estimator: RewardEstimator,
    pub damping: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Short-long: limit-shape area and `z'(1)`, in agent-rate-1 units.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub area: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_prime: Option<f64>,
    pub fquad_grid: FquadGrid,
    /// Distance-cost: torus sides to compare.
    pub sides: Vec<usize>,
    pub d_max: usize,
    pub support_share: f64,
    pub window_runs: usize,
}

impl Default for NashParams {
    fn default() -> Self {
        Self {
            method: NashMethod::FixedPoint,
            multipliers: None,
            estimator: RewardEstimator::Conditional,
            damping: 0.5,
            max_iterations: 200,
            tolerance: 1e-6,
            area: None,
            z_prime: None,
            fquad_grid: FquadGrid::default(),
            sides: Vec::new(),
            d_max: 8,
            support_share: 0.01,
            window_runs: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Fit {
    #[default]
    None,
    Linear,
    Loglog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    /// Dotted path of the varied setting in `base`, e.g. `topology.side`.
    pub parameter: String,
    pub values: Vec<toml::Value>,
    /// JSON pointer into each point's summary, e.g. `/window_mean`.
    pub response: String,
    #[serde(default)]
    pub fit: Fit,
    /// The experiment run at every point.
    pub base: toml::Table,
}

fn default_replicates() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<Topology>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward: Option<RewardConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ego: Option<EgoDeviation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic: Option<AnalyticParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fquad: Option<FquadParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nash: Option<NashParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepParams>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::new("", format!("parse error: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
            .map_err(|e| ConfigError::new("", format!("{}: {}", path.display(), e.message)))
    }

    pub fn from_table(table: toml::Table) -> Result<Self, ConfigError> {
        Self::deserialize(table).map_err(|e| ConfigError::new("", format!("parse error: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// JSON with sorted keys; the basis of the config hash.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        serde_json::to_string(&value).expect("json value serializes")
    }

    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical_json().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("validated config has a seed")
    }

    pub fn topology(&self) -> Result<&Topology, ConfigError> {
        self.topology
            .as_ref()
            .ok_or_else(|| ConfigError::new("topology", "missing table"))
    }

    pub fn reward_spec(&self) -> Result<RewardSpec, ConfigError> {
        self.reward
            .as_ref()
            .ok_or_else(|| ConfigError::new("reward", "missing table"))?
            .spec()
    }

    /// Population profile: the `strategy` table or a default for the
    /// topology.
    pub fn profile(&self) -> Result<Strategy, ConfigError> {
        if let Some(s) = &self.strategy {
            return Ok(s.clone());
        }
        Ok(match self.topology()? {
            Topology::Complete { .. } | Topology::TorusNn { .. } => Strategy::Uniform { rate: 1.0 },
            Topology::TorusShortLong { .. } => Strategy::NearFar {
                near: 1.0,
                far: 0.01,
            },
            Topology::TorusDistanceCost { .. } => Strategy::ByDistance { rates: vec![1.0] },
        })
    }

    /// Check everything that can be checked without running.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.seed.is_none() {
            return Err(ConfigError::new(
                "seed",
                "missing; give it in the config or with --seed",
            ));
        }
        if self.replicates == 0 {
            return Err(ConfigError::new("replicates", "must be >= 1"));
        }
        if let Some(t) = &self.topology {
            t.validate().map_err(|e| ConfigError::new("topology", e))?;
        }
        if let Some(r) = &self.reward {
            r.spec()?;
        }
        if let Some(s) = &self.strategy {
            check_rates("strategy", s)?;
        }
        if let Some(e) = &self.ego {
            check_rates("ego.strategy", &e.strategy)?;
            if let Some(t) = &self.topology {
                if e.agent >= t.agents() {
                    return Err(ConfigError::new(
                        "ego.agent",
                        format!("{} is not one of the {} agents", e.agent, t.agents()),
                    ));
                }
                t.coords_of(&e.strategy)
                    .map_err(|err| ConfigError::new("ego.strategy", err))?;
            }
        }
        match self.kind {
            Kind::Simulate => {
                let t = self.topology()?;
                let p = self.profile()?;
                t.population_coords(&p)
                    .map_err(|e| ConfigError::new("strategy", e))?;
                let sim = self.simulate.clone().unwrap_or_default();
                let [lo, hi] = sim.window;
                if !(0.0 < lo && lo < hi && hi <= 1.0) {
                    return Err(ConfigError::new(
                        "simulate.window",
                        "needs 0 < lo < hi <= 1",
                    ));
                }
                if sim.regular && !matches!(t, Topology::Complete { .. }) {
                    return Err(ConfigError::new(
                        "simulate.regular",
                        "only on the complete graph",
                    ));
                }
            }
            Kind::Analytic => {
                let a = self
                    .analytic
                    .as_ref()
                    .ok_or_else(|| ConfigError::new("analytic", "missing table"))?;
                if matches!(
                    a,
                    AnalyticParams::NashCg | AnalyticParams::PayoffCurve { .. }
                ) {
                    self.reward_spec()?;
                }
            }
            Kind::Fquad => {
                let f = self.fquad.clone().unwrap_or_default();
                if !(f.lambda > 0.0 && f.lambda.is_finite()) {
                    return Err(ConfigError::new("fquad.lambda", "must be > 0"));
                }
            }
            Kind::Lattice => {
                if self.lattice.is_none() {
                    return Err(ConfigError::new("lattice", "missing table"));
                }
            }
            Kind::Nash => {
                let t = self.topology()?;
                self.reward_spec()?;
                let n = self.nash.clone().unwrap_or_default();
                if !(n.damping > 0.0 && n.damping <= 1.0) {
                    return Err(ConfigError::new("nash.damping", "must be in (0, 1]"));
                }
                if !(n.tolerance > 0.0) {
                    return Err(ConfigError::new("nash.tolerance", "must be > 0"));
                }
                match n.method {
                    NashMethod::FixedPoint | NashMethod::BestResponse => {
                        let p = self.profile()?;
                        t.population_coords(&p)
                            .map_err(|e| ConfigError::new("strategy", e))?;
                    }
                    NashMethod::ShortLong => {
                        if !matches!(t, Topology::TorusShortLong { .. }) {
                            return Err(ConfigError::new(
                                "topology",
                                "short_long method needs a short-long torus",
                            ));
                        }
                        if n.area.is_none() {
                            return Err(ConfigError::new("nash.area", "missing"));
                        }
                        if n.z_prime.is_none() {
                            return Err(ConfigError::new("nash.z_prime", "missing"));
                        }
                    }
                    NashMethod::DistanceCost => {
                        if !matches!(t, Topology::TorusDistanceCost { .. }) {
                            return Err(ConfigError::new(
                                "topology",
                                "distance_cost method needs a distance-cost torus",
                            ));
                        }
                    }
                }
            }
            Kind::Sweep => {
                let s = self
                    .sweep
                    .as_ref()
                    .ok_or_else(|| ConfigError::new("sweep", "missing table"))?;
                if s.values.is_empty() {
                    return Err(ConfigError::new("sweep.values", "grid is empty"));
                }
                if s.base.get("kind").and_then(|k| k.as_str()) == Some("sweep") {
                    return Err(ConfigError::new("sweep.base.kind", "sweeps do not nest"));
                }
            }
        }
        Ok(())
    }
}

fn check_rates(field: &str, s: &Strategy) -> Result<(), ConfigError> {
    let ok = |x: f64| x.is_finite() && x >= 0.0;
    let bad = |name: String, x: f64| {
        ConfigError::new(name, format!("rate must be finite and >= 0, got {x}"))
    };
    match s {
        Strategy::Uniform { rate } if !ok(*rate) => Err(bad(format!("{field}.rate"), *rate)),
        Strategy::NearFar { near, .. } if !ok(*near) => Err(bad(format!("{field}.near"), *near)),
        Strategy::NearFar { far, .. } if !ok(*far) => Err(bad(format!("{field}.far"), *far)),
        Strategy::ByDistance { rates } => match rates.iter().position(|&r| !ok(r)) {
            Some(i) => Err(bad(format!("{field}.rates[{i}]"), rates[i])),
            None => Ok(()),
        },
        _ => Ok(()),
    }
}

/// Set `value` at a dotted `path` in `table`, creating tables on the way.
pub fn set_path(
    table: &mut toml::Table,
    path: &str,
    value: toml::Value,
) -> Result<(), ConfigError> {
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(ConfigError::new(
            "sweep.parameter",
            format!("bad path `{path}`"),
        ));
    }
    let mut node = table;
    for k in &keys[..keys.len() - 1] {
        let entry = node
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry.as_table_mut().ok_or_else(|| {
            ConfigError::new(
                "sweep.parameter",
                format!("`{k}` in `{path}` is not a table"),
            )
        })?;
    }
    node.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}
