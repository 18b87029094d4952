//! Rank-reward gossip games: first-passage percolation simulation,
//! closed-form complete-graph theory, the short-long integral equation,
//! lattice estimators and empirical Nash search.

pub mod analytic_cg;
pub mod error;
pub mod fpp;
pub mod fquad;
pub mod lattice;
pub mod nash;
pub mod quad;
pub mod reward;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use fpp::{
    ego_rank_distribution, percolate, percolate_regular, probe, spread_stats, EgoDeviation,
    EgoProbe, RankDistribution, RewardEstimator, RunResult, SpreadStats, Strategy, Topology,
};
pub use reward::{FiniteKReward, RewardSpec, RewardTable};
