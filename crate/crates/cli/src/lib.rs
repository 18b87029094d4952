//! Config-driven experiment runner for `gossipfpp`.

pub mod config;
pub mod experiments;
pub mod output;
pub mod sweep;

use std::path::Path;
use std::time::Instant;

use config::{ConfigError, ExperimentConfig, Kind};
use output::{write_outcome, write_record, Outcome, ResultRecord};

/// Why a run stopped. Config problems exit with 2, the rest with 1.
#[derive(Debug)]
pub enum Failure {
    Config(ConfigError),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "config error: {e}"),
            Failure::Runtime(e) => write!(f, "error: {e:#}"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast::<ConfigError>() {
            Ok(c) => Failure::Config(c),
            Err(e) => Failure::Runtime(e),
        }
    }
}

/// Command-line settings that replace config values.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
}

/// Apply overrides, check the kind the caller expects, and validate.
pub fn prepare(
    mut cfg: ExperimentConfig,
    expect: Option<Kind>,
    ov: Overrides,
) -> Result<ExperimentConfig, ConfigError> {
    if let Some(k) = expect {
        if cfg.kind != k {
            return Err(ConfigError::new(
                "kind",
                format!(
                    "config is a `{}` experiment, not `{}`",
                    cfg.kind.name(),
                    k.name()
                ),
            ));
        }
    }
    if ov.seed.is_some() {
        cfg.seed = ov.seed;
    }
    if let Some(r) = ov.replicates {
        cfg.replicates = r;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Run a non-sweep experiment in memory.
pub fn execute(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    match cfg.kind {
        Kind::Simulate => experiments::simulate(cfg),
        Kind::Analytic => experiments::analytic(cfg),
        Kind::Fquad => experiments::fquad(cfg),
        Kind::Lattice => experiments::lattice(cfg),
        Kind::Nash => experiments::nash(cfg),
        Kind::Sweep => Err(anyhow::anyhow!(
            "sweeps write per-point directories; use run"
        )),
    }
}

/// Run a validated config and write its outputs under `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<ResultRecord, Failure> {
    let start = Instant::now();
    log::info!("{} experiment, config {}", cfg.kind.name(), cfg.hash());
    let outcome = match cfg.kind {
        Kind::Sweep => sweep::run(cfg, out)?,
        _ => execute(cfg)?,
    };
    let outputs = write_outcome(out, &outcome, &cfg.to_toml())?;
    let record = ResultRecord {
        config_hash: cfg.hash(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        kind: cfg.kind.name().to_string(),
        outputs,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    write_record(out, &record)?;
    Ok(record)
}
