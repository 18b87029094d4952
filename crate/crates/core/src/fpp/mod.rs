//! First-passage percolation of one item of information.
//!
//! Agents pull: an uninformed agent calls others at its own rates and learns
//! the item when it calls someone who already has it. With exponential call
//! clocks this is first-passage percolation with rate `rate_i / |group|` on
//! each directed channel `j -> i`.
//!
//! Complete graphs run as a Gillespie race over the informed/uninformed
//! split. Torus topologies run Dijkstra over keyed per-channel exponentials;
//! short-long tori add a Gillespie clock for far calls.
//!
//! A deviating agent (ego) only changes its own pulls. Its receipt is driven
//! by a cumulative hazard `H(t) = Σ_g φ_g h_g(t)` crossing an Exp(1)
//! threshold, which lets [`EgoProbe`] evaluate many ego strategies against
//! one simulated population.

mod complete;
mod probe;
mod regular;
mod torus;

pub use probe::{EgoProbe, RewardEstimator};
pub use regular::percolate_regular;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::stats::{ks_statistic, quantile_sorted};

/// Network communication model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Topology {
    /// Every agent may call any of the other `n - 1` at unit cost.
    Complete { n: usize },
    /// `side x side` torus; calls go to one of the 4 neighbors at unit cost.
    TorusNn { side: usize },
    /// Neighbors at unit cost, any of the `side² - 5` non-neighbors at `far_cost`.
    TorusShortLong { side: usize, far_cost: f64 },
    /// Calls to an agent at torus L1 distance `d` cost `costs[d - 1]`.
    TorusDistanceCost { side: usize, costs: Vec<f64> },
}

/// Call rates of one agent, shaped by the topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Strategy {
    Uniform { rate: f64 },
    NearFar { near: f64, far: f64 },
    ByDistance { rates: Vec<f64> },
}

/// One agent using rates different from everyone else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgoDeviation {
    pub agent: usize,
    pub strategy: Strategy,
}

impl Topology {
    pub fn agents(&self) -> usize {
        match *self {
            Topology::Complete { n } => n,
            Topology::TorusNn { side }
            | Topology::TorusShortLong { side, .. }
            | Topology::TorusDistanceCost { side, .. } => side * side,
        }
    }

    pub fn side(&self) -> Option<usize> {
        match *self {
            Topology::Complete { .. } => None,
            Topology::TorusNn { side }
            | Topology::TorusShortLong { side, .. }
            | Topology::TorusDistanceCost { side, .. } => Some(side),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Topology::Complete { n } if *n < 2 => Err(Error::Topology(format!(
                "complete graph needs n >= 2, got {n}"
            ))),
            Topology::TorusNn { side } if *side < 2 => Err(Error::Topology(format!(
                "torus needs side >= 2, got {side}"
            ))),
            Topology::TorusShortLong { side, far_cost } => {
                if *side < 3 {
                    return Err(Error::Topology(format!(
                        "short-long torus needs side >= 3 for 4 distinct neighbors, got {side}"
                    )));
                }
                if !(*far_cost >= 1.0 && far_cost.is_finite()) {
                    return Err(Error::Topology(format!(
                        "far cost must be >= 1, got {far_cost}"
                    )));
                }
                Ok(())
            }
            Topology::TorusDistanceCost { side, costs } => {
                if *side < 2 {
                    return Err(Error::Topology(format!(
                        "torus needs side >= 2, got {side}"
                    )));
                }
                if costs.is_empty() || costs[0] != 1.0 {
                    return Err(Error::Topology("distance costs need c(1) = 1".into()));
                }
                if costs.iter().any(|c| !c.is_finite()) || costs.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::Topology(
                        "distance costs must be finite and nondecreasing".into(),
                    ));
                }
                let diameter = 2 * (side / 2);
                if costs.len() > diameter {
                    return Err(Error::Topology(format!(
                        "cost table has {} entries but the torus diameter is {diameter}",
                        costs.len()
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Number of rate coordinates a strategy has on this topology.
    pub fn coordinates(&self) -> usize {
        match self {
            Topology::Complete { .. } | Topology::TorusNn { .. } => 1,
            Topology::TorusShortLong { .. } => 2,
            Topology::TorusDistanceCost { costs, .. } => costs.len(),
        }
    }

    /// Cost per call for each rate coordinate.
    pub fn call_costs(&self) -> Vec<f64> {
        match self {
            Topology::Complete { .. } | Topology::TorusNn { .. } => vec![1.0],
            Topology::TorusShortLong { far_cost, .. } => vec![1.0, *far_cost],
            Topology::TorusDistanceCost { costs, .. } => costs.clone(),
        }
    }

    /// Build a strategy of the right shape from coordinates.
    pub fn strategy(&self, coords: &[f64]) -> Result<Strategy> {
        if coords.len() != self.coordinates() {
            return Err(Error::Strategy(format!(
                "topology takes {} rate(s), got {}",
                self.coordinates(),
                coords.len()
            )));
        }
        Ok(match self {
            Topology::Complete { .. } | Topology::TorusNn { .. } => {
                Strategy::Uniform { rate: coords[0] }
            }
            Topology::TorusShortLong { .. } => Strategy::NearFar {
                near: coords[0],
                far: coords[1],
            },
            Topology::TorusDistanceCost { .. } => Strategy::ByDistance {
                rates: coords.to_vec(),
            },
        })
    }

    /// Rates of `strategy` padded to this topology's coordinates.
    pub fn coords_of(&self, strategy: &Strategy) -> Result<Vec<f64>> {
        let coords = match (self, strategy) {
            (Topology::Complete { .. } | Topology::TorusNn { .. }, Strategy::Uniform { rate }) => {
                vec![*rate]
            }
            (Topology::TorusShortLong { .. }, Strategy::NearFar { near, far }) => vec![*near, *far],
            (Topology::TorusDistanceCost { costs, .. }, Strategy::ByDistance { rates }) => {
                if rates.len() > costs.len() {
                    return Err(Error::Strategy(format!(
                        "rates given up to distance {} but costs only up to {}",
                        rates.len(),
                        costs.len()
                    )));
                }
                let mut v = rates.clone();
                v.resize(costs.len(), 0.0);
                v
            }
            _ => {
                return Err(Error::Strategy(format!(
                    "strategy {strategy:?} does not fit topology {self:?}"
                )))
            }
        };
        if let Some(bad) = coords.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::Strategy(format!(
                "rates must be finite and >= 0, got {bad}"
            )));
        }
        Ok(coords)
    }

    /// Rates of a population profile; at least one must be positive.
    pub fn population_coords(&self, strategy: &Strategy) -> Result<Vec<f64>> {
        let coords = self.coords_of(strategy)?;
        if coords.iter().all(|&r| r == 0.0) {
            return Err(Error::ZeroSpread(
                "all population call rates are zero".into(),
            ));
        }
        Ok(coords)
    }
}

impl Strategy {
    pub fn coords(&self) -> Vec<f64> {
        match self {
            Strategy::Uniform { rate } => vec![*rate],
            Strategy::NearFar { near, far } => vec![*near, *far],
            Strategy::ByDistance { rates } => rates.clone(),
        }
    }

    pub fn scaled(&self, c: f64) -> Strategy {
        match self {
            Strategy::Uniform { rate } => Strategy::Uniform { rate: rate * c },
            Strategy::NearFar { near, far } => Strategy::NearFar {
                near: near * c,
                far: far * c,
            },
            Strategy::ByDistance { rates } => Strategy::ByDistance {
                rates: rates.iter().map(|r| r * c).collect(),
            },
        }
    }
}

/// Receipt times of one item in agent order, as produced by an engine.
#[derive(Debug, Clone)]
pub(crate) struct Spread {
    pub time: Vec<f64>,
    /// Agents in the order they were informed.
    pub order: Vec<usize>,
    pub source: usize,
}

/// Outcome of percolating one item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub receipt_time: Vec<f64>,
    /// 1-based rank of each agent; ties are broken by agent index.
    pub rank: Vec<u32>,
    pub source: usize,
    pub seed: u64,
}

impl RunResult {
    /// An ego that never calls is never informed; it gets rank `n` and an
    /// infinite receipt time. Anyone else left out is an error.
    fn from_spread(mut spread: Spread, ego: Option<usize>, seed: u64) -> Result<Self> {
        let n = spread.time.len();
        if spread.order.len() + 1 == n {
            if let Some(a) = ego.filter(|&a| spread.time[a].is_infinite()) {
                spread.order.push(a);
            }
        }
        if spread.order.len() != n {
            return Err(Error::ZeroSpread(format!(
                "only {} of {n} agents can be reached with these rates",
                spread.order.len()
            )));
        }
        let mut rank = vec![0u32; n];
        for (i, &a) in spread.order.iter().enumerate() {
            rank[a] = i as u32 + 1;
        }
        Ok(Self {
            receipt_time: spread.time,
            rank,
            source: spread.source,
            seed,
        })
    }

    pub fn agents(&self) -> usize {
        self.receipt_time.len()
    }

    /// One row per agent: `id,receipt_time,rank`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "id,receipt_time,rank")?;
        for (id, (t, r)) in self.receipt_time.iter().zip(&self.rank).enumerate() {
            writeln!(w, "{id},{t:.16e},{r}")?;
        }
        Ok(())
    }
}

/// Percolate one item. The source is uniform over all agents.
pub fn percolate(
    topology: &Topology,
    profile: &Strategy,
    ego: Option<&EgoDeviation>,
    seed: u64,
) -> Result<RunResult> {
    topology.validate()?;
    let pop = topology.population_coords(profile)?;
    let ego = match ego {
        Some(e) => {
            if e.agent >= topology.agents() {
                return Err(Error::InvalidEgo {
                    agent: e.agent,
                    agents: topology.agents(),
                });
            }
            Some((e.agent, topology.coords_of(&e.strategy)?))
        }
        None => None,
    };
    let ego_ref = ego.as_ref().map(|(a, r)| (*a, r.as_slice()));
    let spread = match topology {
        Topology::Complete { n } => complete::run(*n, pop[0], ego_ref, true, seed),
        _ => torus::TorusModel::new(topology).run(&pop, ego_ref, true, seed),
    };
    RunResult::from_spread(spread, ego.map(|(a, _)| a), seed)
}

/// Empirical spread statistics of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadStats {
    pub lo: f64,
    pub hi: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    pub median: f64,
    /// `t_hi - t_lo`.
    pub window: f64,
    #[serde(skip)]
    sorted: Vec<f64>,
}

impl SpreadStats {
    /// Empirical CDF of receipt times.
    pub fn cdf(&self, t: f64) -> f64 {
        self.sorted.partition_point(|&x| x <= t) as f64 / self.sorted.len() as f64
    }

    pub fn quantile(&self, q: f64) -> f64 {
        quantile_sorted(&self.sorted, q)
    }

    pub fn sorted_times(&self) -> &[f64] {
        &self.sorted
    }
}

/// Window width `t(hi) - t(lo)` of the receipt-time distribution.
pub fn spread_stats(run: &RunResult, lo: f64, hi: f64) -> Result<SpreadStats> {
    if !(0.0 < lo && lo < hi && hi <= 1.0) {
        return Err(Error::Invalid(format!(
            "window quantiles need 0 < lo < hi <= 1, got lo = {lo}, hi = {hi}"
        )));
    }
    let mut sorted = run.receipt_time.clone();
    sorted.sort_by(f64::total_cmp);
    let t_lo = quantile_sorted(&sorted, lo);
    let t_hi = quantile_sorted(&sorted, hi);
    Ok(SpreadStats {
        lo,
        hi,
        t_lo,
        t_hi,
        median: quantile_sorted(&sorted, 0.5),
        window: t_hi - t_lo,
        sorted,
    })
}

/// Sorted sample of ego's rank divided by the number of agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankDistribution {
    pub normalized: Vec<f64>,
}

impl RankDistribution {
    /// Empirical `P(rank/n <= u)`.
    pub fn cdf(&self, u: f64) -> f64 {
        self.normalized.partition_point(|&x| x <= u) as f64 / self.normalized.len() as f64
    }

    /// Kolmogorov distance to Uniform(0, 1).
    pub fn ks_uniform(&self) -> f64 {
        ks_statistic(&self.normalized, |x| x.clamp(0.0, 1.0))
    }
}

/// Empirical law of ego's normalized rank over independent replicates.
pub fn ego_rank_distribution(
    topology: &Topology,
    profile: &Strategy,
    ego: &EgoDeviation,
    replicates: usize,
    seed: u64,
) -> Result<RankDistribution> {
    if replicates == 0 {
        return Err(Error::Invalid("replicates must be >= 1".into()));
    }
    let n = topology.agents() as f64;
    let mut normalized = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            percolate(topology, profile, Some(ego), derive_seed(seed, r))
                .map(|run| run.rank[ego.agent] as f64 / n)
        })
        .collect::<Result<Vec<_>>>()?;
    normalized.sort_by(f64::total_cmp);
    Ok(RankDistribution { normalized })
}

const REDRAW_KEY: u64 = 0x52ED_4A57_0000_0001;

/// Simulate the population with ego removed; see [`EgoProbe`].
pub fn probe(
    topology: &Topology,
    profile: &Strategy,
    ego_agent: usize,
    seed: u64,
) -> Result<EgoProbe> {
    topology.validate()?;
    let pop = topology.population_coords(profile)?;
    if ego_agent >= topology.agents() {
        return Err(Error::InvalidEgo {
            agent: ego_agent,
            agents: topology.agents(),
        });
    }
    // Population draws for the rare case that ego is the source.
    let redraws = (1..).map(|k| derive_seed(seed ^ REDRAW_KEY, k));
    match topology {
        Topology::Complete { n } => {
            let run = |s| complete::run(*n, pop[0], Some((ego_agent, &[0.0])), false, s);
            let spread = run(seed);
            let ego_is_source = spread.source == ego_agent;
            let spread = if ego_is_source {
                redraws
                    .map(run)
                    .find(|s| s.source != ego_agent)
                    .expect("n >= 2")
            } else {
                spread
            };
            EgoProbe::complete(spread, ego_agent, ego_is_source, seed)
        }
        _ => {
            let model = torus::TorusModel::new(topology);
            let zero = vec![0.0; pop.len()];
            let run = |s| model.run(&pop, Some((ego_agent, &zero)), false, s);
            let spread = run(seed);
            let ego_is_source = spread.source == ego_agent;
            let spread = if ego_is_source {
                redraws
                    .map(run)
                    .find(|s| s.source != ego_agent)
                    .expect("n >= 4")
            } else {
                spread
            };
            EgoProbe::torus(&model, spread, ego_agent, ego_is_source, seed)
        }
    }
}
