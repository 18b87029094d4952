use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} is outside its domain ({expected})")]
    Domain {
        what: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("invalid reward: {0}")]
    Reward(String),

    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("invalid strategy: {0}")]
    Strategy(String),

    #[error("ego agent {agent} does not exist in a network of {agents} agents")]
    InvalidEgo { agent: usize, agents: usize },

    #[error("information never spreads: {0}")]
    ZeroSpread(String),

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    Convergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("best-response iteration oscillates; last residuals {trace:?}")]
    Oscillation { trace: Vec<f64> },

    #[error("percolation reached the simulation boundary; enlarge the lattice ({0})")]
    Boundary(String),

    #[error("u-bin {bin} has no samples")]
    EmptyBin { bin: usize },

    #[error("far-call cost c_N = {far_cost} is outside the regime 1 < c_N < N^2 = {limit}")]
    Regime { far_cost: f64, limit: f64 },

    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
