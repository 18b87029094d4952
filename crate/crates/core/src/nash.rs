//! Empirical Nash search.
//!
//! Payoffs of one deviating agent are estimated from [`probe`]s, so every
//! trial strategy is scored against the same simulated populations. Best
//! responses maximize a spline through those common-random-number payoffs;
//! the symmetric equilibrium is found by damped best-response iteration.
//!
//! On the complete graph and the nearest-neighbor torus ranks depend on
//! ego's rate only through `λ = φ/θ`, so the reward curve `ρ(λ)` is
//! simulated once and reused for every `θ`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpp::{percolate, probe, spread_stats, RewardEstimator, Strategy, Topology};
use crate::fquad::{fpp_limit_cdf, FquadSolution};
use crate::reward::RewardSpec;
use crate::rng::derive_seed;
use crate::stats::{golden_max, CubicSpline, Moments};

/// The deviating agent. Sources are uniform, so the choice is immaterial.
const EGO: usize = 0;

/// `0` and `2^(k / per_octave)` for `k` in `lo..=hi`.
pub fn geometric_multipliers(per_octave: u32, lo: i32, hi: i32) -> Vec<f64> {
    std::iter::once(0.0)
        .chain((lo..=hi).map(|k| 2f64.powf(k as f64 / per_octave as f64)))
        .collect()
}

/// Trial grid and sample size of a best-response search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpec {
    /// Trial rates as multiples of the current rate of the scanned
    /// coordinate. Must be increasing and contain 1.
    pub multipliers: Vec<f64>,
    pub replicates: usize,
    #[serde(default)]
    pub estimator: RewardEstimator,
}

impl Default for SearchSpec {
    fn default() -> Self {
        Self {
            multipliers: geometric_multipliers(6, -26, 21),
            replicates: 400,
            estimator: RewardEstimator::Conditional,
        }
    }
}

impl SearchSpec {
    /// Fewer trial points, for strategies with many coordinates.
    pub fn coarse(replicates: usize) -> Self {
        Self {
            multipliers: geometric_multipliers(3, -10, 10),
            replicates,
            estimator: RewardEstimator::Conditional,
        }
    }

    fn validate(&self) -> Result<()> {
        let m = &self.multipliers;
        if self.replicates < 3 {
            return Err(Error::Invalid(format!(
                "search needs >= 3 replicates, got {}",
                self.replicates
            )));
        }
        if m.len() < 3 || m.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::Invalid(
                "multipliers must be >= 3 finite values >= 0".into(),
            ));
        }
        if m.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid(
                "multipliers must be strictly increasing".into(),
            ));
        }
        if !m.contains(&1.0) {
            return Err(Error::Invalid("multipliers must contain 1".into()));
        }
        Ok(())
    }

    fn unit_index(&self) -> usize {
        self.multipliers
            .iter()
            .position(|&m| m == 1.0)
            .expect("validated")
    }
}

/// Ego's payoff per item, `reward - cost`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffEstimate {
    pub payoff: f64,
    pub stderr: f64,
    pub reward: f64,
    pub reward_stderr: f64,
    pub cost: f64,
    pub replicates: usize,
}

fn call_cost(topology: &Topology, rates: &[f64]) -> f64 {
    topology
        .call_costs()
        .iter()
        .zip(rates)
        .map(|(c, r)| c * r)
        .sum()
}

/// Ego's reward for each of `egos` (rate coordinates), one row per
/// replicate. Replicate `r` uses seed `derive_seed(seed, r)` for every ego.
fn reward_rows(
    topology: &Topology,
    spec: &RewardSpec,
    profile: &Strategy,
    egos: &[Vec<f64>],
    replicates: usize,
    seed: u64,
    estimator: RewardEstimator,
) -> Result<Vec<Vec<f64>>> {
    if replicates == 0 {
        return Err(Error::Invalid("replicates must be >= 1".into()));
    }
    (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let p = probe(topology, profile, EGO, derive_seed(seed, r))?;
            Ok(egos.iter().map(|e| p.reward(estimator, spec, e)).collect())
        })
        .collect()
}

fn column(rows: &[Vec<f64>], j: usize) -> Moments {
    rows.iter().map(|row| row[j]).collect()
}

/// Monte-Carlo payoff of `ego` against a population playing `profile`.
/// The same seed gives the same populations for every `ego`.
pub fn payoff_mc(
    topology: &Topology,
    spec: &RewardSpec,
    profile: &Strategy,
    ego: &Strategy,
    replicates: usize,
    seed: u64,
    estimator: RewardEstimator,
) -> Result<PayoffEstimate> {
    topology.validate()?;
    let rates = topology.coords_of(ego)?;
    let cost = call_cost(topology, &rates);
    let rows = reward_rows(
        topology,
        spec,
        profile,
        &[rates],
        replicates,
        seed,
        estimator,
    )?;
    let m = column(&rows, 0);
    Ok(PayoffEstimate {
        payoff: m.mean - cost,
        stderr: m.stderr(),
        reward: m.mean,
        reward_stderr: m.stderr(),
        cost,
        replicates,
    })
}

/// Payoff along one rate coordinate, others held at the population's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffCurve {
    pub coordinate: usize,
    pub rates: Vec<f64>,
    pub reward: Vec<f64>,
    pub reward_stderr: Vec<f64>,
    pub payoff: Vec<f64>,
    /// Grid points where the reward's second difference is positive at
    /// 4 standard errors.
    pub convex_at: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResponse {
    pub strategy: Strategy,
    /// Estimated payoff gain of the best response over playing the profile.
    pub gain: f64,
    /// Standard error of the grid payoff difference behind `gain`.
    pub gain_stderr: f64,
    /// Per coordinate: twice the slope noise at the profile divided by the
    /// payoff curvature, the smallest change of rate the data resolve.
    pub resolution: Vec<f64>,
    /// Ego's reward when playing the profile itself.
    pub base_reward: f64,
    pub base_reward_stderr: f64,
    pub curves: Vec<PayoffCurve>,
    pub warnings: Vec<String>,
}

struct Scan<'a> {
    coordinate: usize,
    rates: Vec<f64>,
    /// Row column of each trial rate.
    cols: Vec<usize>,
    /// Column of ego playing the profile.
    base_col: usize,
    /// Current rate of this coordinate.
    current: f64,
    other_cost: f64,
    unit_cost: f64,
    rows: &'a [Vec<f64>],
}

struct ScanResult {
    curve: PayoffCurve,
    best: f64,
    gain: f64,
    gain_stderr: f64,
    resolution: f64,
    warning: Option<String>,
}

impl Scan<'_> {
    fn run(&self) -> ScanResult {
        let x = &self.rates;
        let k = x.len();
        let cost = |r: f64| self.other_cost + self.unit_cost * r;
        let moments: Vec<Moments> = self.cols.iter().map(|&j| column(self.rows, j)).collect();
        let reward: Vec<f64> = moments.iter().map(|m| m.mean).collect();
        let payoff: Vec<f64> = x.iter().zip(&reward).map(|(&r, &w)| w - cost(r)).collect();

        let mut convex_at = Vec::new();
        for i in 1..k - 1 {
            let (a, b, c) = (self.cols[i - 1], self.cols[i], self.cols[i + 1]);
            let d2: Moments = self
                .rows
                .iter()
                .map(|row| {
                    let s1 = (row[b] - row[a]) / (x[i] - x[i - 1]);
                    let s2 = (row[c] - row[b]) / (x[i + 1] - x[i]);
                    2.0 * (s2 - s1) / (x[i + 1] - x[i - 1])
                })
                .collect();
            if d2.mean > 0.0 && d2.mean > 4.0 * d2.stderr() {
                convex_at.push(i);
            }
        }

        let arg = (0..k).fold(0, |best, i| if payoff[i] > payoff[best] { i } else { best });
        let spline = CubicSpline::natural(x, &payoff);
        let mut warning = None;
        let best = if !convex_at.is_empty() {
            warning = Some(format!(
                "coordinate {}: payoff is not concave on the grid (points {:?}); using the grid argmax",
                self.coordinate, convex_at
            ));
            x[arg]
        } else if arg == k - 1 {
            warning = Some(format!(
                "coordinate {}: best response at the top of the trial grid ({})",
                self.coordinate, x[arg]
            ));
            x[arg]
        } else if arg == 0 && x[0] == 0.0 && spline.derivative(0.0) <= 0.0 {
            0.0
        } else {
            let lo = if arg == 0 { x[0] } else { x[arg - 1] };
            let hi = x[arg + 1];
            golden_max(|r| spline.eval(r), lo, hi, 1e-10 * (hi - lo))
        };

        let base = column(self.rows, self.base_col).mean - cost(self.current);
        let gain = spline.eval(best).max(payoff[arg]) - base;
        let diff: Moments = self
            .rows
            .iter()
            .map(|row| row[self.cols[arg]] - row[self.base_col])
            .collect();

        // Slope noise next to the current rate, through the curvature.
        let at = (0..k)
            .min_by(|&a, &b| {
                (x[a] - self.current)
                    .abs()
                    .total_cmp(&(x[b] - self.current).abs())
            })
            .expect("nonempty grid");
        let next = if at + 1 < k { at + 1 } else { at - 1 };
        let slope: Moments = self
            .rows
            .iter()
            .map(|row| (row[self.cols[next]] - row[self.cols[at]]) / (x[next] - x[at]))
            .collect();
        let h = 0.05 * (x[next] - x[at]).abs();
        let xc = x[at].max(x[0] + h);
        let curvature = (spline.derivative(xc + h) - spline.derivative(xc - h)) / (2.0 * h);
        let resolution = if curvature < 0.0 {
            2.0 * slope.stderr() / -curvature
        } else {
            f64::MAX
        };

        ScanResult {
            curve: PayoffCurve {
                coordinate: self.coordinate,
                rates: x.clone(),
                reward,
                reward_stderr: moments.iter().map(Moments::stderr).collect(),
                payoff,
                convex_at,
            },
            best,
            gain,
            gain_stderr: diff.stderr(),
            resolution,
            warning,
        }
    }
}

fn assemble(topology: &Topology, results: Vec<ScanResult>, base: Moments) -> Result<BestResponse> {
    let coords: Vec<f64> = results.iter().map(|r| r.best).collect();
    let top = results
        .iter()
        .max_by(|a, b| a.gain.total_cmp(&b.gain))
        .expect("at least one coordinate");
    let (gain, gain_stderr) = (top.gain, top.gain_stderr);
    let mut warnings = Vec::new();
    let mut resolution = Vec::new();
    let mut curves = Vec::new();
    for r in results {
        warnings.extend(r.warning);
        resolution.push(r.resolution);
        curves.push(r.curve);
    }
    Ok(BestResponse {
        strategy: topology.strategy(&coords)?,
        gain,
        gain_stderr,
        resolution,
        base_reward: base.mean,
        base_reward_stderr: base.stderr(),
        curves,
        warnings,
    })
}

/// Ego's best reply to `profile`, one coordinate at a time with the others
/// at the profile's rates. All trials share the same populations.
pub fn best_response(
    topology: &Topology,
    spec: &RewardSpec,
    profile: &Strategy,
    search: &SearchSpec,
    seed: u64,
) -> Result<BestResponse> {
    topology.validate()?;
    search.validate()?;
    let theta = topology.population_coords(profile)?;
    let costs = topology.call_costs();
    let top = theta.iter().copied().fold(0.0, f64::max);
    let mut egos = vec![theta.clone()];
    let mut trials = Vec::new();
    for g in 0..theta.len() {
        let reference = if theta[g] > 0.0 { theta[g] } else { 0.1 * top };
        let rates: Vec<f64> = search.multipliers.iter().map(|m| m * reference).collect();
        let cols: Vec<usize> = (egos.len()..egos.len() + rates.len()).collect();
        for &r in &rates {
            let mut e = theta.clone();
            e[g] = r;
            egos.push(e);
        }
        trials.push((rates, cols));
    }
    let rows = reward_rows(
        topology,
        spec,
        profile,
        &egos,
        search.replicates,
        seed,
        search.estimator,
    )?;
    let results = trials
        .into_iter()
        .enumerate()
        .map(|(g, (rates, cols))| {
            Scan {
                coordinate: g,
                rates,
                cols,
                base_col: 0,
                current: theta[g],
                other_cost: call_cost(topology, &theta) - costs[g] * theta[g],
                unit_cost: costs[g],
                rows: &rows,
            }
            .run()
        })
        .collect();
    assemble(topology, results, column(&rows, 0))
}

/// `ρ(λ)` for a topology whose ranks depend only on `φ/θ`.
struct ScalarCurve {
    multipliers: Vec<f64>,
    unit: usize,
    rows: Vec<Vec<f64>>,
}

impl ScalarCurve {
    fn new(topology: &Topology, spec: &RewardSpec, search: &SearchSpec, seed: u64) -> Result<Self> {
        let egos: Vec<Vec<f64>> = search.multipliers.iter().map(|&m| vec![m]).collect();
        let unit = Strategy::Uniform { rate: 1.0 };
        let rows = reward_rows(
            topology,
            spec,
            &unit,
            &egos,
            search.replicates,
            seed,
            search.estimator,
        )?;
        Ok(Self {
            multipliers: search.multipliers.clone(),
            unit: search.unit_index(),
            rows,
        })
    }

    fn respond(&self, topology: &Topology, theta: f64) -> Result<BestResponse> {
        let cost = topology.call_costs()[0];
        let scan = Scan {
            coordinate: 0,
            rates: self.multipliers.iter().map(|m| m * theta).collect(),
            cols: (0..self.multipliers.len()).collect(),
            base_col: self.unit,
            current: theta,
            other_cost: 0.0,
            unit_cost: cost,
            rows: &self.rows,
        };
        assemble(topology, vec![scan.run()], column(&self.rows, self.unit))
    }
}

/// Whether the equilibrium payoff tends to `R̄`, to something in between,
/// or to 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Efficiency {
    Efficient,
    Wasteful,
    TotallyWasteful,
}

/// Share of `R̄` within which a payoff counts as `R̄` or as 0.
pub const CLASSIFY_MARGIN: f64 = 0.1;

/// Classify a payoff with a 2-stderr interval. Intervals that straddle a
/// cut give `Wasteful` and `ambiguous = true`.
pub fn classify(payoff: f64, stderr: f64, rbar: f64) -> (Efficiency, bool) {
    let hi = (1.0 - CLASSIFY_MARGIN) * rbar;
    let lo = CLASSIFY_MARGIN * rbar;
    let (a, b) = (payoff - 2.0 * stderr, payoff + 2.0 * stderr);
    if a >= hi {
        (Efficiency::Efficient, false)
    } else if b <= lo {
        (Efficiency::TotallyWasteful, false)
    } else {
        (Efficiency::Wasteful, b > hi || a < lo)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashOptions {
    pub search: SearchSpec,
    /// Initial step toward the best response; halved whenever a coordinate
    /// overshoots.
    pub damping: f64,
    pub max_iterations: usize,
    /// Relative change of rates below which iteration stops.
    pub tolerance: f64,
    /// Profiles with every rate below this count as silent.
    pub rate_floor: f64,
}

impl Default for NashOptions {
    fn default() -> Self {
        Self {
            search: SearchSpec::default(),
            damping: 0.5,
            max_iterations: 200,
            tolerance: 1e-6,
            rate_floor: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub theta: Vec<f64>,
    pub response: Vec<f64>,
    pub residual: f64,
    pub damping: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashEstimate {
    pub strategy: Strategy,
    pub payoff: f64,
    pub payoff_stderr: f64,
    pub reward: f64,
    pub cost: f64,
    pub rbar: f64,
    pub classification: Efficiency,
    /// The payoff interval straddles a classification cut.
    pub ambiguous: bool,
    /// `max |φ* - θ| / max θ` at the returned profile.
    pub residual: f64,
    /// Relative rate change the Monte-Carlo data resolve at the returned
    /// profile.
    pub statistical_tolerance: f64,
    pub iterations: usize,
    pub trace: Vec<TraceStep>,
    pub warnings: Vec<String>,
}

/// Damped best-response iteration from `init`.
///
/// Stops when the best response is within tolerance of the profile, or
/// when every coordinate is pinned between best responses on both sides
/// with steps below tolerance (flat payoffs make the best response jump).
/// For strategies with several coordinates the tolerance is raised to the
/// statistical resolution, since each step sees fresh noise.
pub fn nash_fixed_point(
    topology: &Topology,
    spec: &RewardSpec,
    init: &Strategy,
    opts: &NashOptions,
    seed: u64,
) -> Result<NashEstimate> {
    topology.validate()?;
    opts.search.validate()?;
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::Invalid(format!(
            "damping must be in (0, 1], got {}",
            opts.damping
        )));
    }
    let rbar = spec.rbar()?;
    let mut theta = topology.population_coords(init)?;
    let scalar = match topology {
        Topology::Complete { .. } | Topology::TorusNn { .. } => {
            Some(ScalarCurve::new(topology, spec, &opts.search, seed)?)
        }
        _ => None,
    };
    let respond = |theta: &[f64]| match &scalar {
        Some(curve) => curve.respond(topology, theta[0]),
        None => best_response(
            topology,
            spec,
            &topology.strategy(theta)?,
            &opts.search,
            seed,
        ),
    };

    let mut damping = opts.damping;
    let mut trace = Vec::new();
    let mut last_dir: Option<Vec<f64>> = None;
    let mut flipped = vec![false; theta.len()];
    let mut warnings = Vec::new();
    for iteration in 1..=opts.max_iterations {
        let br = respond(&theta)?;
        let phi = br.strategy.coords();
        let scale = theta.iter().copied().fold(0.0, f64::max);
        let residual = phi
            .iter()
            .zip(&theta)
            .map(|(p, t)| (p - t).abs())
            .fold(0.0, f64::max)
            / scale;
        let resolution = br.resolution.iter().copied().fold(0.0, f64::max) / scale;
        let tol = if scalar.is_some() {
            opts.tolerance
        } else {
            opts.tolerance.max(resolution)
        };
        trace.push(TraceStep {
            theta: theta.clone(),
            response: phi.clone(),
            residual,
            damping,
        });
        for w in &br.warnings {
            if !warnings.contains(w) {
                warnings.push(w.clone());
            }
        }

        let dir: Vec<f64> = phi
            .iter()
            .zip(&theta)
            .map(|(p, t)| (p - t).signum())
            .collect();
        if let Some(last) = &last_dir {
            let mut overshoot = false;
            for (g, (a, b)) in dir.iter().zip(last).enumerate() {
                if a * b < 0.0 {
                    flipped[g] = true;
                    overshoot = true;
                }
            }
            if overshoot {
                damping *= 0.5;
            }
        }
        let pinned = (0..theta.len()).all(|g| {
            (phi[g] - theta[g]).abs() / scale <= tol
                || (flipped[g] && damping * (phi[g] - theta[g]).abs() / scale <= tol)
        });
        let silent = scale < opts.rate_floor;
        if residual <= tol || pinned || silent {
            let cost = call_cost(topology, &theta);
            let payoff = br.base_reward - cost;
            let (classification, ambiguous) = classify(payoff, br.base_reward_stderr, rbar);
            let strategy = if silent {
                topology.strategy(&vec![0.0; theta.len()])?
            } else {
                topology.strategy(&theta)?
            };
            return Ok(NashEstimate {
                strategy,
                payoff,
                payoff_stderr: br.base_reward_stderr,
                reward: br.base_reward,
                cost,
                rbar,
                classification,
                ambiguous,
                residual,
                statistical_tolerance: resolution,
                iterations: iteration,
                trace,
                warnings,
            });
        }
        if damping < 1e-9 {
            break;
        }
        for (t, p) in theta.iter_mut().zip(&phi) {
            *t = (*t + damping * (p - *t)).max(0.0);
        }
        last_dir = Some(dir);
    }
    Err(Error::Oscillation {
        trace: trace.iter().map(|s| s.residual).collect(),
    })
}

/// Closed-form short-long equilibrium for large far cost `c_N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShortLongNash {
    pub theta_near: f64,
    pub theta_far: f64,
    pub far_cost: f64,
    /// `|z'(1)| I₁ I₂`.
    pub q: f64,
    pub area: f64,
    /// `∫ (1-y) r(y) ∫_{-∞}^{F₁⁻¹(y)} F₁ dy`.
    pub i1: f64,
    /// `∫ r(u) F₁'(F₁⁻¹(u)) du`.
    pub i2: f64,
    /// Call cost per agent, `θ_near + c_N θ_far`.
    pub cost: f64,
    /// 10%-90% window of the limit receipt-time law at the solution.
    pub window: f64,
}

/// Lattice area and `z'(1)` from native units (rate 1 per directed
/// neighbor channel) to agent rate 1, where time runs 4 times slower.
pub fn lattice_to_agent_units(area_native: f64, z_prime_native: f64) -> (f64, f64) {
    (area_native / 16.0, 4.0 * z_prime_native)
}

/// Solve the two balance conditions for the near and far rates:
/// with `s = A^{1/3} θ_far^{1/3} θ_near^{2/3}` the far condition reads
/// `c_N = I₁ / s` and the near one `θ_near² = s |z'(1)| I₂`, so
/// `θ_near = Q^{1/2} c_N^{-1/2}` and `θ_far = I₁³ / (A Q c_N²)`.
///
/// `area` and `z_prime` are in agent-rate-1 units; see
/// [`lattice_to_agent_units`]. `side`, when given, enforces `c_N < N²`.
pub fn nash_short_long(
    spec: &RewardSpec,
    far_cost: f64,
    area: f64,
    z_prime: f64,
    f1: &FquadSolution,
    side: Option<usize>,
) -> Result<ShortLongNash> {
    let limit = side.map_or(f64::INFINITY, |n| (n * n) as f64);
    if !(far_cost > 1.0 && far_cost < limit) {
        return Err(Error::Regime { far_cost, limit });
    }
    if !(area > 0.0 && area.is_finite()) {
        return Err(Error::Domain {
            what: "area",
            value: area,
            expected: "> 0",
        });
    }
    if !(z_prime.is_finite() && z_prime != 0.0) {
        return Err(Error::Domain {
            what: "z_prime",
            value: z_prime,
            expected: "finite and nonzero",
        });
    }
    if f1.lambda != 1.0 {
        return Err(Error::Invalid(
            "base solution must be for lambda = 1".into(),
        ));
    }
    let r = spec.r_measure();
    let i1 = r.integrate(|u, v| {
        if v <= 0.0 {
            0.0
        } else {
            v * f1.integral_to(f1.quantile(u))
        }
    });
    let i2 = r.integrate(|u, v| {
        if u <= 0.0 || v <= 0.0 {
            0.0
        } else {
            f1.density(f1.quantile(u))
        }
    });
    let q = z_prime.abs() * i1 * i2;
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::Invalid(format!(
            "degenerate balance constant Q = {q}"
        )));
    }
    let theta_near = (q / far_cost).sqrt();
    let theta_far = i1.powi(3) / (area * q * far_cost * far_cost);
    let window = fpp_limit_cdf(theta_near, theta_far, area, f1)?.window(0.1, 0.9);
    Ok(ShortLongNash {
        theta_near,
        theta_far,
        far_cost,
        q,
        area,
        i1,
        i2,
        cost: theta_near + far_cost * theta_far,
        window,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceCostOptions {
    pub nash: NashOptions,
    /// Initial truncation of `θ(d)`.
    pub d_max: usize,
    /// Rates below this share of the largest count as shut off.
    pub support_share: f64,
    /// Runs averaged for the equilibrium window width.
    pub window_runs: usize,
}

impl Default for DistanceCostOptions {
    fn default() -> Self {
        Self {
            nash: NashOptions {
                search: SearchSpec::coarse(400),
                tolerance: 0.02,
                max_iterations: 60,
                ..NashOptions::default()
            },
            d_max: 8,
            support_share: 0.01,
            window_runs: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceCostRow {
    pub side: usize,
    pub d_max: usize,
    pub rates: Vec<f64>,
    /// `Σ_d θ(d) c(d)`.
    pub total_cost: f64,
    pub payoff: f64,
    pub payoff_stderr: f64,
    pub classification: Efficiency,
    /// Largest distance still called at a non-negligible rate.
    pub support: usize,
    /// Mean 10%-90% window of receipt times at the equilibrium.
    pub window: f64,
    pub window_stderr: f64,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

/// Equilibria of the distance-cost torus for each side length.
///
/// `θ(d)` is truncated at `d_max`, doubled while the equilibrium still
/// calls at the truncation distance.
pub fn distance_cost_efficiency(
    spec: &RewardSpec,
    costs: &[f64],
    sides: &[usize],
    opts: &DistanceCostOptions,
    seed: u64,
) -> Result<Vec<DistanceCostRow>> {
    if sides.is_empty() {
        return Err(Error::Invalid("no torus sides given".into()));
    }
    if opts.d_max == 0 {
        return Err(Error::Invalid("d_max must be >= 1".into()));
    }
    let mut out = Vec::new();
    for (i, &side) in sides.iter().enumerate() {
        let cap = costs.len().min(2 * (side / 2));
        let mut d_max = opts.d_max.min(cap);
        let seed = derive_seed(seed, i as u64);
        let (topology, est) = loop {
            let topology = Topology::TorusDistanceCost {
                side,
                costs: costs[..d_max].to_vec(),
            };
            let init = Strategy::ByDistance { rates: vec![1.0] };
            let est = nash_fixed_point(&topology, spec, &init, &opts.nash, seed)?;
            let rates = est.strategy.coords();
            let top = rates.iter().copied().fold(0.0, f64::max);
            if d_max < cap && rates[d_max - 1] > opts.support_share * top {
                d_max = (2 * d_max).min(cap);
                continue;
            }
            break (topology, est);
        };
        let rates = est.strategy.coords();
        let top = rates.iter().copied().fold(0.0, f64::max);
        let support = rates
            .iter()
            .rposition(|&r| r > opts.support_share * top)
            .map_or(0, |d| d + 1);
        let windows: Moments = (0..opts.window_runs.max(1) as u64)
            .map(|r| {
                let run = percolate(&topology, &est.strategy, None, derive_seed(seed ^ 0x57, r))?;
                Ok(spread_stats(&run, 0.1, 0.9)?.window)
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .collect();
        out.push(DistanceCostRow {
            side,
            d_max,
            total_cost: est.cost,
            rates,
            payoff: est.payoff,
            payoff_stderr: est.payoff_stderr,
            classification: est.classification,
            support,
            window: windows.mean,
            window_stderr: windows.stderr(),
            iterations: est.iterations,
            warnings: est.warnings,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
