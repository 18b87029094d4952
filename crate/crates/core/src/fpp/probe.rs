//! Ego's reward under any strategy, from one simulation of everyone else.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::torus::TorusModel;
use super::Spread;
use crate::error::{Error, Result};
use crate::reward::RewardSpec;
use crate::rng::{stream, STREAM_EGO};

/// Survival below this is treated as zero.
const HAZARD_CUTOFF: f64 = 46.0;

#[derive(Debug, Clone)]
enum Channels {
    /// Receipt times of the agents behind the channels, sorted.
    Listed(Vec<f64>),
    /// Every other agent except those with these sorted receipt times.
    AllExcept(Vec<f64>),
}

#[derive(Debug, Clone)]
struct Group {
    size: f64,
    channels: Channels,
}

impl Group {
    fn first(&self, others: &[f64]) -> f64 {
        match &self.channels {
            Channels::Listed(c) => c.first().copied().unwrap_or(f64::INFINITY),
            Channels::AllExcept(_) => others.first().copied().unwrap_or(f64::INFINITY),
        }
    }
}

/// Running unit-rate hazard of one group as time increases.
#[derive(Debug, Clone, Copy, Default)]
struct Cursor {
    count: usize,
    sum: f64,
}

impl Cursor {
    fn advance(&mut self, times: &[f64], t: f64) -> f64 {
        while self.count < times.len() && times[self.count] < t {
            self.sum += times[self.count];
            self.count += 1;
        }
        self.count as f64 * t - self.sum
    }
}

/// How ego's expected reward is estimated from a probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RewardEstimator {
    /// Expectation over ego's own call clocks given everyone else.
    #[default]
    Conditional,
    /// One draw of ego's call clocks.
    Sampled,
}

/// Everyone's receipt times with ego removed, plus ego's channels.
///
/// Ego's rank depends only on the others' times before ego is informed,
/// which do not depend on ego's strategy. So one probe answers ego's rank
/// for every strategy, with common random numbers across strategies.
#[derive(Debug, Clone)]
pub struct EgoProbe {
    agents: usize,
    ego_is_source: bool,
    others: Vec<f64>,
    prefix: Vec<f64>,
    groups: Vec<Group>,
    threshold: f64,
}

impl EgoProbe {
    fn build(
        spread: &Spread,
        ego: usize,
        ego_is_source: bool,
        groups: Vec<Group>,
        seed: u64,
    ) -> Result<Self> {
        let mut others: Vec<f64> = spread
            .time
            .iter()
            .enumerate()
            .filter(|&(a, _)| a != ego)
            .map(|(_, &t)| t)
            .collect();
        if others.iter().any(|t| t.is_infinite()) {
            return Err(Error::ZeroSpread(
                "some agents are never reached without ego".into(),
            ));
        }
        others.sort_by(f64::total_cmp);
        let mut prefix = Vec::with_capacity(others.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for &t in &others {
            acc += t;
            prefix.push(acc);
        }
        Ok(Self {
            agents: spread.time.len(),
            ego_is_source,
            others,
            prefix,
            groups,
            threshold: stream(seed, STREAM_EGO).sample(Exp1),
        })
    }

    pub(crate) fn complete(
        spread: Spread,
        ego: usize,
        ego_is_source: bool,
        seed: u64,
    ) -> Result<Self> {
        let n = spread.time.len();
        let groups = vec![Group {
            size: (n - 1) as f64,
            channels: Channels::AllExcept(Vec::new()),
        }];
        Self::build(&spread, ego, ego_is_source, groups, seed)
    }

    pub(crate) fn torus(
        model: &TorusModel,
        spread: Spread,
        ego: usize,
        ego_is_source: bool,
        seed: u64,
    ) -> Result<Self> {
        let sorted = |mut v: Vec<f64>| {
            v.sort_by(f64::total_cmp);
            v
        };
        let mut groups: Vec<Group> = model
            .groups
            .iter()
            .map(|g| {
                let mut times = Vec::new();
                for &(dx, dy, mult) in &g.offsets {
                    let t = spread.time[model.shift(ego, dx, dy)];
                    for _ in 0..mult as usize {
                        times.push(t);
                    }
                }
                Group {
                    size: g.size,
                    channels: Channels::Listed(sorted(times)),
                }
            })
            .collect();
        if model.far {
            let near = model.neighbors(ego).map(|a| spread.time[a]).to_vec();
            groups.push(Group {
                size: model.far_targets(),
                channels: Channels::AllExcept(sorted(near)),
            });
        }
        Self::build(&spread, ego, ego_is_source, groups, seed)
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn ego_is_source(&self) -> bool {
        self.ego_is_source
    }

    /// Sorted receipt times of everyone but ego. When ego was the source
    /// these come from a redrawn population whose source is someone else.
    pub fn others(&self) -> &[f64] {
        &self.others
    }

    /// Sorted receipt times behind ego's channels of coordinate `g`, when
    /// those channels are listed individually.
    pub fn channel_times(&self, g: usize) -> Option<&[f64]> {
        match &self.groups.get(g)?.channels {
            Channels::Listed(c) => Some(c),
            Channels::AllExcept(_) => None,
        }
    }

    /// Ego's rank if informed at time `t`.
    pub fn rank_at(&self, t: f64) -> usize {
        if self.ego_is_source {
            return 1;
        }
        1 + self.others.partition_point(|&o| o < t)
    }

    /// Walk the others' times from the first one with positive hazard,
    /// passing `(index, H(time))` until `f` returns false. Returns the
    /// starting index.
    fn walk(&self, rates: &[f64], f: impl FnMut(usize, f64) -> bool) -> usize {
        assert_eq!(rates.len(), self.groups.len(), "rate coordinates");
        let first = self
            .groups
            .iter()
            .zip(rates)
            .filter(|(_, &r)| r > 0.0)
            .map(|(g, _)| g.first(&self.others))
            .fold(f64::INFINITY, f64::min);
        let start = self.others.partition_point(|&o| o <= first);
        self.walk_from(rates, start, f);
        start
    }

    /// As [`walk`](Self::walk) from a given index, with no positivity check.
    fn walk_from(&self, rates: &[f64], start: usize, mut f: impl FnMut(usize, f64) -> bool) {
        let mut cursors = vec![Cursor::default(); self.groups.len()];
        for i in start..self.others.len() {
            let t = self.others[i];
            let mut h = 0.0;
            for ((g, &r), cur) in self.groups.iter().zip(rates).zip(cursors.iter_mut()) {
                if r <= 0.0 {
                    continue;
                }
                let unit = match &g.channels {
                    Channels::Listed(c) => cur.advance(c, t),
                    Channels::AllExcept(ex) => {
                        let all = i as f64 * t - self.prefix[i];
                        all - cur.advance(ex, t)
                    }
                };
                h += r * unit / g.size;
            }
            if !f(i, h) {
                break;
            }
        }
    }

    /// `E[R(rank/n) | others]` over ego's own call clocks and over the
    /// event that ego is the source, which has probability `1/n`.
    pub fn conditional_reward(&self, spec: &RewardSpec, rates: &[f64]) -> f64 {
        let n = self.agents;
        let p_source = 1.0 / n as f64;
        p_source * spec.rank_value(1, n)
            + (1.0 - p_source) * self.reward_given_other_source(spec, rates)
    }

    fn reward_given_other_source(&self, spec: &RewardSpec, rates: &[f64]) -> f64 {
        let n = self.agents;
        // E = R((i0+1)/n) - Σ_{i>=i0} S(o_i) [R((i+1)/n) - R((i+2)/n)]
        // Terms vanish once R has reached R(1).
        let flat = first_flat_rank(spec, n);
        let mut loss = 0.0;
        let start = self.walk(rates, |i, h| {
            if h > HAZARD_CUTOFF || i + 1 >= flat {
                return false;
            }
            let drop = spec.rank_value(i + 1, n) - spec.rank_value(i + 2, n);
            loss += (-h).exp() * drop;
            true
        });
        spec.rank_value(start + 1, n) - loss
    }

    /// Ego's rank for one draw of its call clocks.
    pub fn sampled_rank(&self, rates: &[f64]) -> usize {
        if self.ego_is_source {
            return 1;
        }
        let mut rank = self.agents;
        self.walk(rates, |i, h| {
            if h >= self.threshold {
                rank = i + 1;
                false
            } else {
                true
            }
        });
        rank
    }

    pub fn reward(&self, estimator: RewardEstimator, spec: &RewardSpec, rates: &[f64]) -> f64 {
        match estimator {
            RewardEstimator::Conditional => self.conditional_reward(spec, rates),
            RewardEstimator::Sampled => spec.rank_value(self.sampled_rank(rates), self.agents),
        }
    }
}

/// Smallest rank `r` with `R(r/n) = R(1)`.
fn first_flat_rank(spec: &RewardSpec, n: usize) -> usize {
    let last = spec.rank_value(n, n);
    let (mut lo, mut hi) = (1, n);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if spec.rank_value(mid, n) <= last {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}
