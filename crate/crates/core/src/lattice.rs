//! Monte-Carlo estimates of nearest-neighbor lattice percolation quantities.
//!
//! Native units: every directed neighbor channel has rate 1, i.e. each
//! agent calls each of its 4 neighbors at rate 1. Rank-based quantities
//! (`g(u)`, the Nash rate) do not depend on the time unit.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpp::{self, Strategy, Topology};
use crate::reward::RewardSpec;
use crate::rng::{derive_seed, stream, EdgeClock, STREAM_AUX};
use crate::stats::{fit_line, ks_statistic, LineFit, Moments, MonotoneCubic};

/// Smallest source distance accepted by [`sample_tau`].
pub const TAU_MIN_DISTANCE: f64 = 32.0;
/// Angular bins of the radial shape function.
pub const SHAPE_BINS: usize = 64;
/// Bins of `u` in the conditional estimate of `g(u)`.
pub const U_BINS: usize = 10;
/// Finite-difference steps for `z'(1)`; Richardson combines the two.
pub const Z_STEPS: [f64; 2] = [0.1, 0.2];

/// Square `[-half, half]²` of the plane lattice.
struct BoxLattice {
    half: i64,
    side: usize,
}

impl BoxLattice {
    fn new(half: i64) -> Self {
        Self {
            half,
            side: (2 * half + 1) as usize,
        }
    }

    fn index(&self, x: i64, y: i64) -> usize {
        (y + self.half) as usize * self.side + (x + self.half) as usize
    }

    fn coords(&self, i: usize) -> (i64, i64) {
        (
            (i % self.side) as i64 - self.half,
            (i / self.side) as i64 - self.half,
        )
    }

    fn on_boundary(&self, i: usize) -> bool {
        let (x, y) = self.coords(i);
        x.abs() == self.half || y.abs() == self.half
    }

    fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let (x, y) = self.coords(i);
        [(1, 0), (-1, 0), (0, 1), (0, -1)]
            .into_iter()
            .filter_map(move |(dx, dy)| {
                let (u, v) = (x + dx, y + dy);
                (u.abs() <= self.half && v.abs() <= self.half).then(|| self.index(u, v))
            })
    }

    /// Dijkstra from `source` with unit-rate channel clocks, never passing
    /// through `blocked`. `visit` sees nodes in time order and returns
    /// false to stop.
    fn percolate(
        &self,
        source: usize,
        blocked: Option<usize>,
        seed: u64,
        mut visit: impl FnMut(usize, f64) -> bool,
    ) {
        let clock = EdgeClock::new(seed);
        let n = self.side * self.side;
        let mut best = vec![f64::INFINITY; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        best[source] = 0.0;
        heap.push(Item(0.0, source));
        while let Some(Item(t, v)) = heap.pop() {
            if done[v] {
                continue;
            }
            done[v] = true;
            if !visit(v, t) {
                return;
            }
            for w in self.neighbors(v) {
                if done[w] || Some(w) == blocked {
                    continue;
                }
                let cand = t + clock.unit_exp(v, w);
                if cand < best[w] {
                    best[w] = cand;
                    heap.push(Item(cand, w));
                }
            }
        }
    }
}

#[derive(Clone, Copy)]
struct Item(f64, usize);

impl PartialEq for Item {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Item {}
impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

/// Limit shape `B` of the wetted set and its wrapped area profile `q(s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeEstimate {
    pub half_width: i64,
    pub s_max: f64,
    pub replicates: usize,
    /// Mean of `|B_s| / s²` at `s_max`.
    pub area: f64,
    pub area_stderr: f64,
    /// Same at `s_max / 2`.
    pub area_half: f64,
    /// Equal-area radius of `B` in each angular bin, bins centered at
    /// `(b + 1/2) 2π / bins`.
    pub radial: Vec<f64>,
    /// `B` contains the L1 ball of this radius.
    pub l1_inner: f64,
    /// `B` is contained in the L1 ball of this radius.
    pub l1_outer: f64,
    /// Relative area gap between the radial polygon and its convex hull.
    pub hull_excess: f64,
    /// `q(s)`: area of `sB` wrapped onto the unit torus.
    pub q_s: Vec<f64>,
    pub q: Vec<f64>,
}

impl ShapeEstimate {
    /// Radius of `B` in direction `angle`, interpolated between bins.
    pub fn radius(&self, angle: f64) -> f64 {
        let bins = self.radial.len();
        let x = angle.rem_euclid(TAU) / TAU * bins as f64 - 0.5;
        let i = x.floor();
        let s = x - i;
        let a = (i as i64).rem_euclid(bins as i64) as usize;
        let b = (a + 1) % bins;
        self.radial[a] * (1.0 - s) + self.radial[b] * s
    }

    pub fn contains(&self, x: f64, y: f64, s: f64) -> bool {
        let r = (x * x + y * y).sqrt();
        r <= s * self.radius(y.atan2(x))
    }

    pub fn q_spline(&self) -> MonotoneCubic {
        MonotoneCubic::new(&self.q_s, &self.q)
    }

    /// `V(u) = q'(q⁻¹(u))`.
    pub fn v_of_u(&self, spline: &MonotoneCubic, u: f64) -> f64 {
        spline.derivative(spline.inverse(u))
    }
}

struct ShapeReplicate {
    full: f64,
    half: f64,
    bins: Vec<f64>,
    l1_inner: i64,
    l1_outer: i64,
}

/// Wetted sets `B_s` from the origin of a `[-L, L]²` box, up to `s_max`.
pub fn estimate_shape(
    half_width: i64,
    s_max: f64,
    replicates: usize,
    seed: u64,
) -> Result<ShapeEstimate> {
    if replicates == 0 || !(s_max > 0.0) || half_width < 2 {
        return Err(Error::Invalid(
            "shape needs replicates >= 1, s_max > 0, L >= 2".into(),
        ));
    }
    let lat = BoxLattice::new(half_width);
    let reps = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut wet = vec![false; lat.side * lat.side];
            let mut touched = false;
            let (mut full, mut half) = (0.0, 0.0);
            let mut bins = vec![0.0; SHAPE_BINS];
            let origin = lat.index(0, 0);
            lat.percolate(origin, None, derive_seed(seed, r), |v, t| {
                if t > s_max {
                    return false;
                }
                if lat.on_boundary(v) {
                    touched = true;
                    return false;
                }
                wet[v] = true;
                full += 1.0;
                if t <= 0.5 * s_max {
                    half += 1.0;
                }
                let (x, y) = lat.coords(v);
                if (x, y) != (0, 0) {
                    let a = (y as f64).atan2(x as f64).rem_euclid(TAU);
                    bins[((a / TAU * SHAPE_BINS as f64) as usize).min(SHAPE_BINS - 1)] += 1.0;
                }
                true
            });
            if touched {
                return Err(Error::Boundary(format!(
                    "wetted set reached the box edge at L = {half_width} before s = {s_max}"
                )));
            }
            let mut l1_inner = i64::MAX;
            let mut l1_outer = 0;
            for (i, &w) in wet.iter().enumerate() {
                let (x, y) = lat.coords(i);
                let d = x.abs() + y.abs();
                if w {
                    l1_outer = l1_outer.max(d);
                } else {
                    l1_inner = l1_inner.min(d - 1);
                }
            }
            Ok(ShapeReplicate {
                full,
                half,
                bins,
                l1_inner,
                l1_outer,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let s2 = s_max * s_max;
    let areas: Moments = reps.iter().map(|r| r.full / s2).collect();
    let area_half = reps.iter().map(|r| r.half / (0.25 * s2)).sum::<f64>() / replicates as f64;
    let width = TAU / SHAPE_BINS as f64;
    let mut radial: Vec<f64> = (0..SHAPE_BINS)
        .map(|b| {
            let mean = reps.iter().map(|r| r.bins[b]).sum::<f64>() / replicates as f64;
            (2.0 * mean / (s2 * width)).sqrt()
        })
        .collect();
    let sector_area: f64 = radial.iter().map(|r| 0.5 * width * r * r).sum();
    let fix = (areas.mean / sector_area).sqrt();
    radial.iter_mut().for_each(|r| *r *= fix);

    let polygon: Vec<(f64, f64)> = radial
        .iter()
        .enumerate()
        .map(|(b, &r)| {
            let a = (b as f64 + 0.5) * width;
            (r * a.cos(), r * a.sin())
        })
        .collect();
    let hull_excess = polygon_area(&convex_hull(&polygon)) / polygon_area(&polygon) - 1.0;

    let mut shape = ShapeEstimate {
        half_width,
        s_max,
        replicates,
        area: areas.mean,
        area_stderr: areas.stderr(),
        area_half,
        radial,
        l1_inner: reps.iter().map(|r| r.l1_inner).min().unwrap_or(0) as f64 / s_max,
        l1_outer: reps.iter().map(|r| r.l1_outer).max().unwrap_or(0) as f64 / s_max,
        hull_excess,
        q_s: Vec::new(),
        q: Vec::new(),
    };
    let (q_s, q) = wrapped_area_table(&shape, 100, 128);
    shape.q_s = q_s;
    shape.q = q;
    Ok(shape)
}

/// `q(s)` on `steps + 1` values of `s` up to full coverage, by rastering
/// the unit torus with `raster²` points.
fn wrapped_area_table(shape: &ShapeEstimate, steps: usize, raster: usize) -> (Vec<f64>, Vec<f64>) {
    let r_min = shape.radial.iter().cloned().fold(f64::INFINITY, f64::min);
    let r_max = shape.radial.iter().cloned().fold(0.0, f64::max);
    let s_cover = 1.05 * (0.5 * 2f64.sqrt()) / r_min;
    let s_values: Vec<f64> = (0..=steps)
        .map(|j| s_cover * j as f64 / steps as f64)
        .collect();
    let q = s_values
        .par_iter()
        .map(|&s| {
            if s == 0.0 {
                return 0.0;
            }
            let reach = (s * r_max).ceil() as i64 + 1;
            let mut hit = 0usize;
            for i in 0..raster {
                for j in 0..raster {
                    let px = (i as f64 + 0.5) / raster as f64 - 0.5;
                    let py = (j as f64 + 0.5) / raster as f64 - 0.5;
                    let covered = (-reach..=reach).any(|kx| {
                        (-reach..=reach).any(|ky| shape.contains(px + kx as f64, py + ky as f64, s))
                    });
                    hit += covered as usize;
                }
            }
            hit as f64 / (raster * raster) as f64
        })
        .collect();
    (s_values, q)
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Andrew's monotone chain.
fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &q in &p {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], q) <= 0.0 {
            lower.pop();
        }
        lower.push(q);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &q in p.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], q) <= 0.0 {
            upper.pop();
        }
        upper.push(q);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn polygon_area(p: &[(f64, f64)]) -> f64 {
    let n = p.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (p[i], p[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum::<f64>()
        .abs()
}

/// Receipt gaps of the 4 neighbors of the origin, which is removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauSample {
    /// Neighbors in the order `+x, -x, +y, -y`.
    pub gaps: [f64; 4],
    /// Time the first neighbor is reached.
    pub first: f64,
    /// Euclidean distance of the source from the origin.
    pub distance: f64,
    /// Direction of the source from the origin, in `[0, 2π)`.
    pub direction: f64,
}

/// Source at lattice distance about `r` in a uniform direction.
pub fn sample_tau(r: f64, replicates: usize, seed: u64) -> Result<Vec<TauSample>> {
    if !(r >= TAU_MIN_DISTANCE) {
        return Err(Error::Domain {
            what: "r",
            value: r,
            expected: ">= 32",
        });
    }
    let half = (2.0 * r).ceil() as i64 + 16;
    let lat = BoxLattice::new(half);
    Ok((0..replicates as u64)
        .into_par_iter()
        .map(|i| {
            let s = derive_seed(seed, i);
            let direction = stream(s, STREAM_AUX).random::<f64>() * TAU;
            let (sx, sy) = (
                (r * direction.cos()).round() as i64,
                (r * direction.sin()).round() as i64,
            );
            let origin = lat.index(0, 0);
            let nbrs = [
                lat.index(1, 0),
                lat.index(-1, 0),
                lat.index(0, 1),
                lat.index(0, -1),
            ];
            let mut times = [f64::INFINITY; 4];
            let mut left = 4;
            lat.percolate(lat.index(sx, sy), Some(origin), s, |v, t| {
                if let Some(k) = nbrs.iter().position(|&w| w == v) {
                    times[k] = t;
                    left -= 1;
                }
                left > 0
            });
            let first = times.iter().cloned().fold(f64::INFINITY, f64::min);
            TauSample {
                gaps: times.map(|t| t - first),
                first,
                distance: ((sx * sx + sy * sy) as f64).sqrt(),
                direction,
            }
        })
        .collect())
}

/// Ego's delay functional `Z(λ) = min_i(τ_i + ξ_i/λ) - min_i(τ_i + ξ_i)`.
pub fn z_path(gaps: &[f64; 4], xi: &[f64; 4], lambda: f64) -> f64 {
    let m = |l: f64| {
        (0..4)
            .map(|i| gaps[i] + xi[i] / l)
            .fold(f64::INFINITY, f64::min)
    };
    m(lambda) - m(1.0)
}

/// Derivative of `Z` at 1 along one path: central differences at the
/// two steps, combined by Richardson extrapolation.
pub fn z_slope_path(gaps: &[f64; 4], xi: &[f64; 4]) -> f64 {
    let d = |h: f64| (z_path(gaps, xi, 1.0 + h) - z_path(gaps, xi, 1.0 - h)) / (2.0 * h);
    let (h1, h2) = (Z_STEPS[0], Z_STEPS[1]);
    (4.0 * d(h1) - d(h2)) / 3.0
}

/// One `u`-bin of the conditional estimate `g(u) = -z_u'(1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GBin {
    pub u_lo: f64,
    pub u_hi: f64,
    pub count: u64,
    pub g: f64,
    pub g_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZLambdaEstimate {
    pub lambdas: Vec<f64>,
    pub z: Vec<f64>,
    pub z_stderr: Vec<f64>,
    pub z_prime: f64,
    pub z_prime_stderr: f64,
    pub paths: usize,
    /// Paths where `Z(1) != 0`.
    pub z1_nonzero: usize,
    /// Paths where `Z` increases somewhere on the λ grid.
    pub monotone_violations: usize,
    /// Present when a shape estimate was supplied.
    pub g_bins: Option<Vec<GBin>>,
}

/// Coupled estimates of `z(λ) = E Z(λ)` and `z'(1)`; each τ sample gets
/// `draws` independent ξ vectors, shared across all λ.
///
/// With a shape, `U` is drawn uniform independently of τ and the binned
/// `E(V Z | U)` gives `g(u)`; the joint law of `(τ, U, V)` is not
/// modelled.
pub fn estimate_z(
    samples: &[TauSample],
    lambdas: &[f64],
    draws: usize,
    shape: Option<&ShapeEstimate>,
    seed: u64,
) -> Result<ZLambdaEstimate> {
    if samples.is_empty() || draws == 0 {
        return Err(Error::Invalid(
            "need at least one τ sample and one draw".into(),
        ));
    }
    if let Some(bad) = lambdas.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(Error::Domain {
            what: "lambda",
            value: *bad,
            expected: "> 0",
        });
    }
    let mut grid = lambdas.to_vec();
    grid.sort_by(f64::total_cmp);
    let spline = shape.map(|s| s.q_spline());

    struct Acc {
        z: Vec<Moments>,
        slope: Moments,
        z1_nonzero: usize,
        violations: usize,
        bins: Vec<Moments>,
    }
    let empty = || Acc {
        z: vec![Moments::default(); grid.len()],
        slope: Moments::default(),
        z1_nonzero: 0,
        violations: 0,
        bins: vec![Moments::default(); U_BINS],
    };
    let per_sample: Vec<Acc> = samples
        .par_iter()
        .enumerate()
        .map(|(i, sample)| {
            let mut rng = stream(derive_seed(seed, i as u64), STREAM_AUX);
            let mut acc = empty();
            for _ in 0..draws {
                let xi: [f64; 4] = std::array::from_fn(|_| rng.sample(Exp1));
                let path: Vec<f64> = grid.iter().map(|&l| z_path(&sample.gaps, &xi, l)).collect();
                for (m, &z) in acc.z.iter_mut().zip(&path) {
                    m.push(z);
                }
                if z_path(&sample.gaps, &xi, 1.0) != 0.0 {
                    acc.z1_nonzero += 1;
                }
                if path.windows(2).any(|w| w[1] > w[0]) {
                    acc.violations += 1;
                }
                let d = z_slope_path(&sample.gaps, &xi);
                acc.slope.push(d);
                if let (Some(shape), Some(sp)) = (shape, spline.as_ref()) {
                    let u: f64 = rng.random();
                    let b = ((u * U_BINS as f64) as usize).min(U_BINS - 1);
                    acc.bins[b].push(-shape.v_of_u(sp, u) * d);
                }
            }
            acc
        })
        .collect();
    let mut total = empty();
    for a in &per_sample {
        for (t, m) in total.z.iter_mut().zip(&a.z) {
            *t = t.merge(m);
        }
        total.slope = total.slope.merge(&a.slope);
        total.z1_nonzero += a.z1_nonzero;
        total.violations += a.violations;
        for (t, m) in total.bins.iter_mut().zip(&a.bins) {
            *t = t.merge(m);
        }
    }
    let g_bins = shape.map(|_| {
        total
            .bins
            .iter()
            .enumerate()
            .map(|(b, m)| GBin {
                u_lo: b as f64 / U_BINS as f64,
                u_hi: (b + 1) as f64 / U_BINS as f64,
                count: m.count,
                g: m.mean,
                g_stderr: m.stderr(),
            })
            .collect()
    });
    Ok(ZLambdaEstimate {
        z: total.z.iter().map(|m| m.mean).collect(),
        z_stderr: total.z.iter().map(|m| m.stderr()).collect(),
        lambdas: grid,
        z_prime: total.slope.mean,
        z_prime_stderr: total.slope.stderr(),
        paths: samples.len() * draws,
        z1_nonzero: total.z1_nonzero,
        monotone_violations: total.violations,
        g_bins,
    })
}

/// Large-`N` Nash rate on the nearest-neighbor torus,
/// `N⁻¹ ∫ g(u) r(u) du` with `g` constant on each `u`-bin.
pub fn nash_torus_nn(spec: &RewardSpec, z: &ZLambdaEstimate, side: usize) -> Result<f64> {
    let bins = z
        .g_bins
        .as_ref()
        .ok_or_else(|| Error::Invalid("z estimate has no u-bins; supply a shape".into()))?;
    if side < 2 {
        return Err(Error::Topology(format!(
            "torus needs side >= 2, got {side}"
        )));
    }
    let r = spec.r_measure();
    let mut total = 0.0;
    for (b, bin) in bins.iter().enumerate() {
        if bin.count == 0 {
            return Err(Error::EmptyBin { bin: b });
        }
        total += bin.g * r.mass(bin.u_lo, bin.u_hi);
    }
    Ok(total / side as f64)
}

/// Normalized count of agents informed when a fixed vertex's first
/// neighbor is reached, with the vertex itself removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformRankCheck {
    pub side: usize,
    pub ks: f64,
    pub normalized: Vec<f64>,
}

pub fn uniform_rank_check(side: usize, replicates: usize, seed: u64) -> Result<UniformRankCheck> {
    if replicates == 0 {
        return Err(Error::Invalid("replicates must be >= 1".into()));
    }
    let topo = Topology::TorusNn { side };
    let profile = Strategy::Uniform { rate: 4.0 };
    let n2 = (side * side) as f64;
    let mut normalized = (0..replicates as u64)
        .into_par_iter()
        .map(|i| {
            let probe = fpp::probe(&topo, &profile, 0, derive_seed(seed, i))?;
            let first = probe.channel_times(0).map_or(f64::INFINITY, |c| c[0]);
            let count = probe.others().partition_point(|&t| t <= first);
            Ok(count as f64 / n2)
        })
        .collect::<Result<Vec<f64>>>()?;
    normalized.sort_by(f64::total_cmp);
    Ok(UniformRankCheck {
        side,
        ks: ks_statistic(&normalized, |x| x.clamp(0.0, 1.0)),
        normalized,
    })
}

/// Regress simulated rank shifts `M_λ - M_1` of a fixed vertex on the
/// prediction `N V(U) Z(λ)` with `U = M_1 / N²`.
pub fn rank_translation_fit(
    side: usize,
    shape: &ShapeEstimate,
    lambda: f64,
    replicates: usize,
    seed: u64,
) -> Result<LineFit> {
    let topo = Topology::TorusNn { side };
    let profile = Strategy::Uniform { rate: 4.0 };
    let spline = shape.q_spline();
    let n = side as f64;
    let points = (0..replicates as u64)
        .into_par_iter()
        .map(|i| {
            let s = derive_seed(seed, i);
            let probe = fpp::probe(&topo, &profile, 0, s)?;
            if probe.ego_is_source() {
                return Ok(None);
            }
            let t: Vec<f64> = probe.channel_times(0).expect("neighbor channels").to_vec();
            let mut rng = stream(s, STREAM_AUX);
            let xi: [f64; 4] = std::array::from_fn(|_| rng.sample(Exp1));
            let arrive = |l: f64| {
                (0..4)
                    .map(|k| t[k] + xi[k] / l)
                    .fold(f64::INFINITY, f64::min)
            };
            let (t1, tl) = (arrive(1.0), arrive(lambda));
            let (m1, ml) = (probe.rank_at(t1) as f64, probe.rank_at(tl) as f64);
            let u = m1 / (n * n);
            Ok(Some((n * shape.v_of_u(&spline, u) * (tl - t1), ml - m1)))
        })
        .collect::<Result<Vec<_>>>()?;
    let (x, y): (Vec<f64>, Vec<f64>) = points.into_iter().flatten().unzip();
    Ok(fit_line(&x, &y))
}

/// Reference direction grid used by the τ symmetry checks.
pub fn direction_quadrant(direction: f64) -> usize {
    ((direction.rem_euclid(TAU) / (0.5 * PI)) as usize).min(3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ks_two_sample;

    #[test]
    fn shape_is_consistent() {
        let s = estimate_shape(320, 120.0, 8, 1).unwrap();
        assert!(s.area > 0.0);
        assert!(
            ((s.area - s.area_half) / s.area).abs() < 0.03 + 3.0 * s.area_stderr / s.area,
            "A {} vs A/2 {}",
            s.area,
            s.area_half
        );
        assert!(0.0 < s.l1_inner && s.l1_inner <= s.l1_outer);
        assert!(s.hull_excess < 0.03, "hull excess {}", s.hull_excess);
        assert!(s.q.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(*s.q.last().unwrap(), 1.0);
        assert_eq!(s.q[0], 0.0);
    }

    #[test]
    fn shape_reports_boundary_touch() {
        assert!(matches!(
            estimate_shape(10, 40.0, 2, 1),
            Err(Error::Boundary(_))
        ));
    }

    #[test]
    fn tau_samples_have_zero_minimum() {
        let taus = sample_tau(32.0, 50, 3).unwrap();
        for t in &taus {
            assert_eq!(t.gaps.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
            assert!(t.gaps.iter().all(|g| *g >= 0.0 && g.is_finite()));
        }
        assert!(sample_tau(8.0, 1, 1).is_err());
    }

    #[test]
    fn tau_marginals_are_exchangeable() {
        let taus = sample_tau(32.0, 2000, 5).unwrap();
        let marginal = |k: usize| {
            let mut v: Vec<f64> = taus.iter().map(|t| t.gaps[k]).collect();
            v.sort_by(f64::total_cmp);
            v
        };
        for a in 0..4 {
            for b in a + 1..4 {
                let d = ks_two_sample(&marginal(a), &marginal(b));
                assert!(d < 0.05, "neighbors {a},{b}: {d}");
            }
        }
    }

    #[test]
    fn degenerate_tau_gives_quarter_slope() {
        let zero = vec![
            TauSample {
                gaps: [0.0; 4],
                first: 0.0,
                distance: 0.0,
                direction: 0.0,
            };
            4000
        ];
        let z = estimate_z(&zero, &[0.5, 1.0, 2.0], 10, None, 2).unwrap();
        assert!(
            (z.z_prime + 0.25).abs() < 2.0 * z.z_prime_stderr,
            "{} ± {}",
            z.z_prime,
            z.z_prime_stderr
        );
        assert!((z.z[2] - (0.5 - 1.0) / 4.0).abs() < 4.0 * z.z_stderr[2]);
    }

    #[test]
    fn coupling_is_pathwise() {
        let taus = sample_tau(32.0, 200, 9).unwrap();
        let z = estimate_z(&taus, &[0.5, 0.8, 1.0, 1.25, 2.0], 5, None, 4).unwrap();
        assert_eq!(z.z1_nonzero, 0);
        assert_eq!(z.monotone_violations, 0);
        assert!(z.z_prime + 3.0 * z.z_prime_stderr < 0.0);
    }

    #[test]
    fn torus_nash_scales_inversely() {
        let shape = estimate_shape(60, 20.0, 8, 1).unwrap();
        let taus = sample_tau(32.0, 200, 2).unwrap();
        let z = estimate_z(&taus, &[1.0], 5, Some(&shape), 3).unwrap();
        let a = nash_torus_nn(&RewardSpec::Linear, &z, 32).unwrap();
        let b = nash_torus_nn(&RewardSpec::Linear, &z, 64).unwrap();
        assert!(a > 0.0);
        assert!((b / a - 0.5).abs() < 1e-12);
        let no_bins = estimate_z(&taus, &[1.0], 1, None, 3).unwrap();
        assert!(nash_torus_nn(&RewardSpec::Linear, &no_bins, 32).is_err());
    }

    #[test]
    fn small_torus_rank_is_uniform() {
        // Chi-square on the rank of vertex 0 among 64 with a uniform source.
        let topo = Topology::TorusNn { side: 8 };
        let p = Strategy::Uniform { rate: 1.0 };
        let reps = 12_800u64;
        let mut counts = [0f64; 64];
        for i in 0..reps {
            let r = fpp::percolate(&topo, &p, None, derive_seed(17, i)).unwrap();
            counts[r.rank[0] as usize - 1] += 1.0;
        }
        let expect = reps as f64 / 64.0;
        let chi2: f64 = counts.iter().map(|c| (c - expect).powi(2) / expect).sum();
        // 63 degrees of freedom: p = 0.001 at about 103.4.
        assert!(chi2 < 103.4, "chi2 {chi2}");
    }

    proptest::proptest! {
        #[test]
        fn z_is_zero_at_one_and_nonincreasing(
            g in proptest::array::uniform4(0.0f64..5.0),
            xi in proptest::array::uniform4(1e-6f64..10.0),
            l1 in 0.05f64..20.0,
            l2 in 0.05f64..20.0,
        ) {
            let mut gaps = g;
            let m = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
            gaps.iter_mut().for_each(|x| *x -= m);
            proptest::prop_assert_eq!(z_path(&gaps, &xi, 1.0), 0.0);
            let (lo, hi) = (l1.min(l2), l1.max(l2));
            proptest::prop_assert!(z_path(&gaps, &xi, hi) <= z_path(&gaps, &xi, lo));
            // Each central difference is a secant of a nonincreasing path;
            // their Richardson combination need not keep the sign at kinks.
            for h in Z_STEPS {
                proptest::prop_assert!(z_path(&gaps, &xi, 1.0 + h) <= z_path(&gaps, &xi, 1.0 - h));
            }
        }
    }
}
