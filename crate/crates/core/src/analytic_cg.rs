//! Closed-form theory for the complete graph in the large-`n` limit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;
use crate::reward::RewardSpec;

/// Agreement required between the two Nash integrals.
const NASH_TOL: f64 = 1e-8;

fn positive(what: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Domain {
            what,
            value,
            expected: "> 0",
        })
    }
}

fn nonnegative(what: &'static str, value: f64) -> Result<f64> {
    if value >= 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Domain {
            what,
            value,
            expected: ">= 0",
        })
    }
}

/// Recentered receipt-time law when everyone calls at rate `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticLaw {
    pub theta: f64,
}

impl LogisticLaw {
    pub fn new(theta: f64) -> Result<Self> {
        Ok(Self {
            theta: positive("theta", theta)?,
        })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        logistic(self.theta * x)
    }

    pub fn quantile(&self, q: f64) -> f64 {
        (q / (1.0 - q)).ln() / self.theta
    }

    /// Time for the informed fraction to go from `lo` to `hi`.
    pub fn window(&self, lo: f64, hi: f64) -> f64 {
        self.quantile(hi) - self.quantile(lo)
    }
}

/// `e^x / (1 + e^x)` without overflow.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Receipt-time law of one agent calling at `phi` among agents calling at `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviantLaw {
    pub phi: f64,
    pub theta: f64,
}

impl DeviantLaw {
    pub fn new(phi: f64, theta: f64) -> Result<Self> {
        Ok(Self {
            phi: nonnegative("phi", phi)?,
            theta: positive("theta", theta)?,
        })
    }

    /// `1 - (1 - F_θ(x))^{φ/θ}`.
    pub fn cdf(&self, x: f64) -> f64 {
        let survive = logistic(-self.theta * x);
        -(self.phi / self.theta * survive.ln()).exp_m1()
    }

    /// Limit law of the deviant's normalized rank: `1 - (1 - u)^{φ/θ}`.
    pub fn rank_cdf(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        if u == 1.0 {
            return if self.phi > 0.0 { 1.0 } else { 0.0 };
        }
        -(self.phi / self.theta * (-u).ln_1p()).exp_m1()
    }
}

/// Net payoff per unit time of an agent calling at `phi` when everyone
/// else calls at `theta`.
pub fn payoff_cg(spec: &RewardSpec, phi: f64, theta: f64) -> Result<f64> {
    let phi = nonnegative("phi", phi)?;
    let theta = positive("theta", theta)?;
    let a = phi / theta;
    let gain = spec.r_measure().integrate(|_, v| -(a * v.ln()).exp_m1());
    Ok(spec.terminal() + gain - phi)
}

/// `d payoff / d phi`.
pub fn payoff_cg_slope(spec: &RewardSpec, phi: f64, theta: f64) -> Result<f64> {
    let phi = nonnegative("phi", phi)?;
    let theta = positive("theta", theta)?;
    let a = phi / theta;
    let gain = spec.r_measure().integrate(|_, v| {
        if v > 0.0 {
            -(a * v.ln()).exp() * v.ln()
        } else {
            0.0
        }
    });
    Ok(gain / theta - 1.0)
}

/// `g(u) = -(1 - u) log(1 - u)`.
pub fn g_weight(u: f64) -> f64 {
    let v = 1.0 - u;
    if v <= 0.0 || u <= 0.0 {
        0.0
    } else {
        -v * v.ln()
    }
}

/// Symmetric Nash call rate, by two independent integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgNash {
    /// `∫ r(u) g(u) du`.
    pub theta: f64,
    /// `∫ (1 + log(1 - u)) R(u) du`.
    pub theta_by_parts: f64,
    /// Payoff slope at `phi = theta`; zero at a Nash point.
    pub stationarity: f64,
    pub payoff: f64,
}

pub fn nash_cg(spec: &RewardSpec) -> Result<CgNash> {
    spec.rbar()?;
    let theta = spec
        .r_measure()
        .integrate(|_, v| if v > 0.0 { -v * v.ln() } else { 0.0 });
    let theta_by_parts = spec.integrate_against_value(|_, v| 1.0 + v.ln());
    if (theta - theta_by_parts).abs() > NASH_TOL {
        return Err(Error::Convergence {
            solver: "nash integrals",
            iterations: 1,
            residual: (theta - theta_by_parts).abs(),
        });
    }
    let (stationarity, payoff) = if theta > 0.0 {
        (
            payoff_cg_slope(spec, theta, theta)?,
            payoff_cg(spec, theta, theta)?,
        )
    } else {
        (0.0, spec.terminal())
    };
    if stationarity.abs() > NASH_TOL {
        return Err(Error::Convergence {
            solver: "nash stationarity",
            iterations: 1,
            residual: stationarity.abs(),
        });
    }
    Ok(CgNash {
        theta,
        theta_by_parts,
        stationarity,
        payoff,
    })
}

/// Nash point when only the first `k` of `n` recipients are paid `n / k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteKNash {
    pub theta: f64,
    pub payoff: f64,
    /// `(k - 1) / k`, the large-`n` limit of `theta`.
    pub theta_limit: f64,
}

/// `θ_n = w_n (n-k)/(n-1) Σ_{j=1}^{k-1} 1/(n-j)` with `w_n = n/k`.
///
/// The source is informed for free, so ego competes for the `k - 1`
/// remaining prizes; the sum is the marginal prize probability per unit of
/// ego's rate along the way.
pub fn nash_finite_k(n: usize, k: usize) -> Result<FiniteKNash> {
    if k < 2 || k >= n {
        return Err(Error::Invalid(format!(
            "finite-k rewards need 2 <= k < n, got k = {k}, n = {n}"
        )));
    }
    let (nf, kf) = (n as f64, k as f64);
    let w = nf / kf;
    let sum: f64 = (1..k).map(|j| 1.0 / (nf - j as f64)).sum();
    let theta = w * (nf - kf) / (nf - 1.0) * sum;
    Ok(FiniteKNash {
        theta,
        payoff: 1.0 - theta,
        theta_limit: (kf - 1.0) / kf,
    })
}

/// Probability that ego is second to learn an item, `φ / (φ + (n-2) θ)`.
pub fn prob_second(n: usize, phi: f64, theta: f64) -> Result<f64> {
    if n < 3 {
        return Err(Error::Invalid(format!("needs n >= 3, got {n}")));
    }
    let phi = nonnegative("phi", phi)?;
    let theta = nonnegative("theta", theta)?;
    let total = phi + (n as f64 - 2.0) * theta;
    if total == 0.0 {
        return Err(Error::Invalid("phi and theta are both zero".into()));
    }
    Ok(phi / total)
}

/// Nash rate when both parties to a call exchange what they know.
pub fn nash_symmetric(theta_asy: f64) -> Result<f64> {
    Ok(0.5 * nonnegative("theta_asy", theta_asy)?)
}

/// Nash rate when each agent earns `c` per later recipient:
/// `-c ∫₀¹ ((1-y)/y) log(1-y) dy`.
pub fn nash_audience(c: f64) -> Result<f64> {
    let c = positive("c", c)?;
    let integral = quad::integrate_unit(
        |y, v| {
            if y == 0.0 {
                1.0
            } else if v == 0.0 {
                0.0
            } else {
                -(v / y) * v.ln()
            }
        },
        0.0,
        1.0,
    );
    Ok(c * integral)
}

/// Time grid for the regular-call equation in units of the call period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodGrid {
    pub lo: f64,
    pub hi: f64,
    pub steps_per_period: usize,
}

impl Default for PeriodGrid {
    fn default() -> Self {
        Self {
            lo: -24.0,
            hi: 12.0,
            steps_per_period: 64,
        }
    }
}

/// How a fixed point was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    DampedIteration,
    ForwardMarch,
}

/// Receipt-time law when calls happen every `1 / θ` time units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularCallsLaw {
    pub theta: f64,
    /// Grid times, shifted so that `F(0) = 1/2`.
    pub times: Vec<f64>,
    pub cdf: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub method: SolveMethod,
}

impl RegularCallsLaw {
    /// Linear interpolation; 0 and 1 outside the grid.
    pub fn eval(&self, t: f64) -> f64 {
        interpolate(&self.times, &self.cdf, t)
    }
}

pub(crate) fn interpolate(xs: &[f64], ys: &[f64], t: f64) -> f64 {
    if t <= xs[0] {
        return if t == xs[0] { ys[0] } else { 0.0 };
    }
    let last = xs.len() - 1;
    if t >= xs[last] {
        return if t == xs[last] { ys[last] } else { 1.0 };
    }
    let i = xs.partition_point(|&x| x <= t) - 1;
    let s = (t - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + s * (ys[i + 1] - ys[i])
}

/// `P` at the `m` grid steps left of the grid, from the tail
/// `F(t) = f0 e^{t - t0}` (the early-phase solution of the linearized
/// equation `F(t) = ∫_{-∞}^t F`).
fn left_survival(f0: f64, m: usize) -> Vec<f64> {
    let h = 1.0 / m as f64;
    (0..m)
        .map(|j| {
            let back = (m - j) as f64 * h;
            (0..60)
                .map(|i| (-f0 * (-back - i as f64).exp()).ln_1p())
                .sum::<f64>()
                .exp()
        })
        .collect()
}

/// Right side of the period-unit equation, `1 - ∫_{t-1}^t P(s) ds`,
/// with `P(s) = ∏_{i>=0} (1 - F(s - i))`.
fn regular_map(f: &[f64], m: usize) -> Vec<f64> {
    let n = f.len();
    let h = 1.0 / m as f64;
    let left = left_survival(f[0], m);
    let mut p = vec![0.0; n];
    for j in 0..n {
        let prev = if j >= m { p[j - m] } else { left[j] };
        p[j] = (1.0 - f[j]) * prev;
    }
    let mut out = vec![0.0; n];
    // Running sum of P over the open window (i - m, i).
    let mut inner: f64 = left[1..].iter().sum();
    for i in 0..n {
        let back = if i >= m { p[i - m] } else { left[i] };
        out[i] = 1.0 - h * (0.5 * back + inner + 0.5 * p[i]);
        inner += p[i];
        inner -= if i + 1 >= m {
            p[i + 1 - m]
        } else {
            left[i + 1]
        };
    }
    out
}

/// Discrete fixed point of the regular-call equation.
///
/// Damped iteration from the logistic law comes first. It tends to lock onto
/// a travelling wave (`T F` a time shift of `F`) instead of a fixed point;
/// the equation is causal, so in that case the discrete system is solved
/// exactly by marching forward from an exponential left tail.
pub fn regular_calls_fixed_point(theta: f64, grid: PeriodGrid) -> Result<RegularCallsLaw> {
    let theta = positive("theta", theta)?;
    if !(grid.lo < 0.0 && grid.hi > 0.0 && grid.steps_per_period >= 4) {
        return Err(Error::Invalid(
            "grid must straddle 0 with at least 4 steps per period".into(),
        ));
    }
    let m = grid.steps_per_period;
    let h = 1.0 / m as f64;
    let n = ((grid.hi - grid.lo) / h).round() as usize + 1;
    let t: Vec<f64> = (0..n).map(|i| grid.lo + i as f64 * h).collect();

    let mut f: Vec<f64> = t.iter().map(|&x| logistic(x)).collect();
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut method = SolveMethod::DampedIteration;
    const CAP: usize = 500;
    while iterations < CAP {
        let g = regular_map(&f, m);
        residual = sup_diff(&f, &g);
        if residual < 1e-9 {
            break;
        }
        for (a, b) in f.iter_mut().zip(&g) {
            *a = 0.5 * *a + 0.5 * b;
        }
        // Time shifts are neutral; pin the midpoint so the iterate cannot
        // drift into the trivial solutions F = 0 or F = 1.
        f = recenter(&t, &f, |x, f0, t0| f0 * (x - t0).exp());
        iterations += 1;
    }
    let degenerate = f[n / 2] < 1e-6 || f[n / 2] > 1.0 - 1e-6;
    if residual >= 1e-6 || degenerate {
        log::info!("regular-call iteration stalled at residual {residual:.3e}; marching forward");
        f = regular_march(n, m, grid.lo);
        residual = sup_diff(&f, &regular_map(&f, m));
        method = SolveMethod::ForwardMarch;
    }
    if residual >= 1e-6 {
        return Err(Error::Convergence {
            solver: "regular calls",
            iterations,
            residual,
        });
    }
    if f[0] > 1e-3 || f[n - 1] < 0.999 {
        return Err(Error::Invalid(format!(
            "grid too narrow: F runs from {:.3e} to {:.6}",
            f[0],
            f[n - 1]
        )));
    }
    let mid = crossing(&t, &f, 0.5);
    Ok(RegularCallsLaw {
        theta,
        times: t.iter().map(|x| (x - mid) / theta).collect(),
        cdf: f,
        residual,
        iterations,
        method,
    })
}

/// Solve the discrete equation point by point. `F_i` enters its own
/// right side only through `P_i = (1 - F_i) P_{i-m}`, so each step is linear.
fn regular_march(n: usize, m: usize, lo: f64) -> Vec<f64> {
    let h = 1.0 / m as f64;
    let t: Vec<f64> = (0..n).map(|i| lo + i as f64 * h).collect();
    // Early on F grows like C e^t; adjust C to put the midpoint near 0.
    let mut c = 1e-3;
    let mut f = vec![0.0; n];
    for _ in 0..4 {
        f[0] = (c * lo.exp()).min(1e-3);
        let left = left_survival(f[0], m);
        let mut p = vec![0.0; n];
        let mut inner: f64 = left[1..].iter().sum();
        for i in 0..n {
            let back = if i >= m { p[i - m] } else { left[i] };
            if i > 0 {
                let q = h * (0.5 * back + inner) / (1.0 - 0.5 * h * back);
                f[i] = 1.0 - q.clamp(0.0, 1.0);
            }
            p[i] = (1.0 - f[i]) * back;
            inner += p[i];
            inner -= if i + 1 >= m {
                p[i + 1 - m]
            } else {
                left[i + 1]
            };
        }
        c *= crossing(&t, &f, 0.5).exp();
    }
    f
}

/// Shift `f` in time so that it crosses 1/2 at 0. Values left of the grid
/// come from `tail(t, f[0], t[0])`; right of the grid they are 1.
pub(crate) fn recenter(t: &[f64], f: &[f64], tail: impl Fn(f64, f64, f64) -> f64) -> Vec<f64> {
    let mid = crossing(t, f, 0.5);
    t.iter()
        .map(|&x| {
            let y = x + mid;
            if y < t[0] {
                tail(y, f[0], t[0])
            } else {
                interpolate(t, f, y)
            }
        })
        .collect()
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// First `t` where the nondecreasing `f` reaches `level`, interpolated.
pub(crate) fn crossing(t: &[f64], f: &[f64], level: f64) -> f64 {
    let i = f.partition_point(|&x| x < level);
    if i == 0 {
        return t[0];
    }
    if i >= f.len() {
        return t[t.len() - 1];
    }
    let s = (level - f[i - 1]) / (f[i] - f[i - 1]);
    t[i - 1] + s * (t[i] - t[i - 1])
}
