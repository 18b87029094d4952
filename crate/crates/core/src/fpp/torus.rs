//! Dijkstra over keyed channel clocks on a periodic square lattice.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::Exp1;

use super::{Spread, Topology};
use crate::rng::{stream, EdgeClock, STREAM_EGO, STREAM_POPULATION};

/// Channels an agent spreads its calls over for one rate coordinate.
#[derive(Debug, Clone)]
pub(crate) struct LocalGroup {
    /// `(dx, dy, multiplicity)` with offsets reduced mod side.
    pub offsets: Vec<(usize, usize, f64)>,
    /// Total number of channels; each gets `rate * multiplicity / size`.
    pub size: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct TorusModel {
    pub side: usize,
    pub groups: Vec<LocalGroup>,
    /// Short-long far calls, driven by the coordinate after the local groups.
    pub far: bool,
}

pub(crate) fn torus_distance(side: usize, dx: usize, dy: usize) -> usize {
    dx.min(side - dx) + dy.min(side - dy)
}

impl TorusModel {
    pub fn new(topology: &Topology) -> Self {
        match topology {
            Topology::TorusNn { side } => Self {
                side: *side,
                groups: vec![Self::nearest(*side)],
                far: false,
            },
            Topology::TorusShortLong { side, .. } => Self {
                side: *side,
                groups: vec![Self::nearest(*side)],
                far: true,
            },
            Topology::TorusDistanceCost { side, costs } => {
                let side = *side;
                let mut groups: Vec<LocalGroup> = (0..costs.len())
                    .map(|_| LocalGroup {
                        offsets: Vec::new(),
                        size: 0.0,
                    })
                    .collect();
                for dy in 0..side {
                    for dx in 0..side {
                        let d = torus_distance(side, dx, dy);
                        if d >= 1 && d <= costs.len() {
                            groups[d - 1].offsets.push((dx, dy, 1.0));
                            groups[d - 1].size += 1.0;
                        }
                    }
                }
                Self {
                    side,
                    groups,
                    far: false,
                }
            }
            Topology::Complete { .. } => unreachable!("complete graph has its own engine"),
        }
    }

    fn nearest(side: usize) -> LocalGroup {
        let mut offsets: Vec<(usize, usize, f64)> = Vec::new();
        for o in [(1, 0), (side - 1, 0), (0, 1), (0, side - 1)] {
            match offsets.iter_mut().find(|e| (e.0, e.1) == o) {
                Some(e) => e.2 += 1.0,
                None => offsets.push((o.0, o.1, 1.0)),
            }
        }
        LocalGroup { offsets, size: 4.0 }
    }

    pub fn agents(&self) -> usize {
        self.side * self.side
    }

    pub fn shift(&self, a: usize, dx: usize, dy: usize) -> usize {
        let (x, y) = (a % self.side, a / self.side);
        ((y + dy) % self.side) * self.side + (x + dx) % self.side
    }

    pub fn neighbors(&self, a: usize) -> [usize; 4] {
        let s = self.side;
        [
            self.shift(a, 1, 0),
            self.shift(a, s - 1, 0),
            self.shift(a, 0, 1),
            self.shift(a, 0, s - 1),
        ]
    }

    /// Number of far targets of any caller.
    pub fn far_targets(&self) -> f64 {
        (self.agents() - 5) as f64
    }

    /// Population rates `pop` are per coordinate; ego's rates likewise.
    /// With `include_ego == false` ego never learns the item.
    pub fn run(
        &self,
        pop: &[f64],
        ego: Option<(usize, &[f64])>,
        include_ego: bool,
        seed: u64,
    ) -> Spread {
        let n = self.agents();
        let clock = EdgeClock::new(seed);
        let mut rng = stream(seed, STREAM_POPULATION);
        let source = rng.random_range(0..n);
        let threshold: f64 = stream(seed, STREAM_EGO).sample(Exp1);
        let ego_agent = ego.map(|e| e.0);
        let far_idx = self.groups.len();

        let mut time = vec![f64::INFINITY; n];
        let mut best = vec![f64::INFINITY; n];
        let mut order = Vec::with_capacity(n);
        let mut heap = BinaryHeap::new();
        best[source] = 0.0;
        heap.push(Entry(0.0, source));

        // Far-call bookkeeping: uninformed non-ego agents in a swap-remove pool.
        let far_rate = if self.far { pop[far_idx] } else { 0.0 };
        let mut pool: Vec<usize> = Vec::new();
        let mut pos: Vec<usize> = Vec::new();
        if far_rate > 0.0 {
            pool = (0..n).filter(|&a| Some(a) != ego_agent).collect();
            pos = vec![usize::MAX; n];
            for (i, &a) in pool.iter().enumerate() {
                pos[a] = i;
            }
        }
        let mut far_left = if far_rate > 0.0 {
            rng.sample(Exp1)
        } else {
            f64::INFINITY
        };

        // Ego's receipt is driven by its hazard over all of its channels:
        // the hazard rate is Σ_g rate_g * (informed channels in g) / size_g.
        let mut ego_live = match ego {
            Some((a, r)) => include_ego && a != source && r.iter().any(|&x| x > 0.0),
            None => false,
        };
        let mut ego_channel = Vec::new();
        let mut ego_weight = vec![0.0; self.groups.len() + 1];
        if ego_live {
            let (a, r) = ego.expect("ego");
            ego_channel = vec![(usize::MAX, 0.0); n];
            for (g, group) in self.groups.iter().enumerate() {
                ego_weight[g] = r[g] / group.size;
                for &(dx, dy, mult) in &group.offsets {
                    ego_channel[self.shift(a, dx, dy)] = (g, mult);
                }
            }
            if self.far {
                ego_weight[far_idx] = r[far_idx] / self.far_targets();
            }
        }
        let ego_nbrs = ego_agent.map(|a| self.neighbors(a));
        let mut informed = 0usize;
        let mut informed_ego_nbrs = 0usize;
        let mut ego_rate = 0.0;
        let mut hazard = 0.0;
        let mut now = 0.0;

        loop {
            while heap.peek().is_some_and(|e| !time[e.1].is_infinite()) {
                heap.pop();
            }
            let t_heap = heap.peek().map_or(f64::INFINITY, |e| e.0);
            let far_total = far_rate * pool.len() as f64;
            let t_far = if far_total > 0.0 {
                now + far_left.max(0.0) / far_total
            } else {
                f64::INFINITY
            };
            let t_ego = if ego_rate > 0.0 {
                now + (threshold - hazard).max(0.0) / ego_rate
            } else {
                f64::INFINITY
            };
            let t = t_heap.min(t_far).min(t_ego);
            if t.is_infinite() {
                break;
            }
            far_left -= far_total * (t - now);
            hazard += ego_rate * (t - now);
            now = t;

            let node = if t_heap <= t_far && t_heap <= t_ego {
                heap.pop().expect("heap event").1
            } else if t_far <= t_ego {
                far_left = rng.sample(Exp1);
                let caller = pool[rng.random_range(0..pool.len())];
                let target = self.far_target(caller, &mut rng);
                if time[target].is_infinite() {
                    continue;
                }
                caller
            } else {
                hazard = threshold;
                ego_rate = 0.0;
                ego_live = false;
                ego_agent.expect("ego hazard")
            };

            time[node] = now;
            order.push(node);
            informed += 1;
            if ego_nbrs.is_some_and(|nb| nb.contains(&node)) {
                informed_ego_nbrs += 1;
            }
            if ego_live {
                let (g, mult) = ego_channel[node];
                if self.far {
                    let outside = (informed - informed_ego_nbrs) as f64;
                    ego_rate =
                        ego_weight[0] * informed_ego_nbrs as f64 + ego_weight[far_idx] * outside;
                } else if g != usize::MAX {
                    ego_rate += ego_weight[g] * mult;
                }
            }
            if !pos.is_empty() && pos[node] != usize::MAX {
                let i = pos[node];
                pool.swap_remove(i);
                if i < pool.len() {
                    pos[pool[i]] = i;
                }
                pos[node] = usize::MAX;
            }

            for (g, group) in self.groups.iter().enumerate() {
                for &(dx, dy, mult) in &group.offsets {
                    let to = self.shift(node, dx, dy);
                    if !time[to].is_infinite() {
                        continue;
                    }
                    if Some(to) == ego_agent {
                        continue;
                    }
                    let rate = pop[g];
                    if rate <= 0.0 {
                        continue;
                    }
                    let cand = now + clock.unit_exp(node, to) * group.size / (rate * mult);
                    if cand < best[to] {
                        best[to] = cand;
                        heap.push(Entry(cand, to));
                    }
                }
            }
        }
        Spread {
            time,
            order,
            source,
        }
    }

    /// Uniform agent other than `caller` and its 4 neighbors.
    fn far_target<R: Rng>(&self, caller: usize, rng: &mut R) -> usize {
        let nb = self.neighbors(caller);
        loop {
            let t = rng.random_range(0..self.agents());
            if t != caller && !nb.contains(&t) {
                return t;
            }
        }
    }
}

/// Heap entry ordered so that `BinaryHeap` pops the earliest time first.
#[derive(Debug, Clone, Copy)]
struct Entry(f64, usize);

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}
