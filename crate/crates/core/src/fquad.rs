//! Limit law of short-long percolation:
//! `1 - F(t) = exp(-λ ∫_{-∞}^t (t - s)² F(s) ds)`.

use serde::{Deserialize, Serialize};

use crate::analytic_cg::{crossing, interpolate, logistic};
use crate::error::{Error, Result};
use crate::stats::fit_line;

/// Uniform time grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FquadGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub h: f64,
}

impl Default for FquadGrid {
    fn default() -> Self {
        Self {
            t_min: -12.0,
            t_max: 6.0,
            h: 1.0 / 256.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FquadOptions {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Width of the logistic starting guess relative to the tail scale.
    #[serde(default = "unit_width")]
    pub start_width: f64,
}

fn unit_width() -> f64 {
    1.0
}

impl Default for FquadOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tolerance: 1e-11,
            max_iterations: 5000,
            start_width: 1.0,
        }
    }
}

/// Grid solution, centered so that `F(0) = 1/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FquadSolution {
    pub lambda: f64,
    pub grid: FquadGrid,
    pub values: Vec<f64>,
    /// Sup-norm residual of the discrete equation.
    pub residual: f64,
    pub iterations: usize,
    /// Iterations whose update had to be made monotone.
    pub projections: usize,
    /// Left tail `F(t) ≈ F(t_min) e^{a (t - t_min)}` with `a = (2λ)^{1/3}`.
    pub tail_rate: f64,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

impl FquadSolution {
    pub fn times(&self) -> Vec<f64> {
        (0..self.values.len())
            .map(|i| self.grid.t_min + i as f64 * self.grid.h)
            .collect()
    }

    fn index_of(&self, t: f64) -> (usize, f64) {
        let x = (t - self.grid.t_min) / self.grid.h;
        let i = (x.floor() as usize).min(self.values.len() - 2);
        (i, x - i as f64)
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t < self.grid.t_min {
            return self.values[0] * (self.tail_rate * (t - self.grid.t_min)).exp();
        }
        if t >= self.grid.t_max {
            return 1.0;
        }
        let (i, s) = self.index_of(t);
        self.values[i] + s * (self.values[i + 1] - self.values[i])
    }

    /// `F'(t)` by central differences on the grid.
    pub fn density(&self, t: f64) -> f64 {
        if t < self.grid.t_min {
            return self.tail_rate * self.eval(t);
        }
        let h = self.grid.h;
        (self.eval(t + h) - self.eval(t - h)) / (2.0 * h)
    }

    /// Smallest `t` with `F(t) >= y`, for `y` in `(0, 1)`.
    pub fn quantile(&self, y: f64) -> f64 {
        let f0 = self.values[0];
        if y <= f0 {
            return self.grid.t_min + (y / f0).ln() / self.tail_rate;
        }
        crossing(&self.times(), &self.values, y)
    }

    /// `∫_{-∞}^t F(s) ds`.
    pub fn integral_to(&self, t: f64) -> f64 {
        let a = self.tail_rate;
        if t < self.grid.t_min {
            return self.eval(t) / a;
        }
        if t >= self.grid.t_max {
            return self.cumulative[self.values.len() - 1] + (t - self.grid.t_max);
        }
        let (i, s) = self.index_of(t);
        let h = self.grid.h;
        let (f0, f1) = (self.values[i], self.values[i + 1]);
        let ft = f0 + s * (f1 - f0);
        self.cumulative[i] + 0.5 * s * h * (f0 + ft)
    }

    /// Exponential rate of the left tail fitted on the grid values in the
    /// lowest decade of `F`.
    pub fn fitted_tail_rate(&self) -> f64 {
        let f0 = self.values[0];
        let t = self.times();
        let (xs, ys): (Vec<f64>, Vec<f64>) = t
            .iter()
            .zip(&self.values)
            .filter(|(_, &f)| f <= 10.0 * f0)
            .map(|(&x, &f)| (x, f.ln()))
            .unzip();
        fit_line(&xs, &ys).slope
    }

    fn with_cumulative(mut self) -> Self {
        let h = self.grid.h;
        let mut c = Vec::with_capacity(self.values.len());
        let mut acc = self.values[0] / self.tail_rate;
        c.push(acc);
        for w in self.values.windows(2) {
            acc += 0.5 * h * (w[0] + w[1]);
            c.push(acc);
        }
        self.cumulative = c;
        self
    }
}

/// `∫_{-∞}^{t_i} (t_i - s)² F(s) ds` at every grid point: trapezoid on the
/// grid through running moments of `F`, plus the exponential tail.
fn memory(f: &[f64], t: &[f64], h: f64, a: f64) -> Vec<f64> {
    let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
    let t0 = t[0];
    let mut out = Vec::with_capacity(f.len());
    for i in 0..f.len() {
        // Work in s - t0 to keep the cancellation small.
        let x = t[i] - t0;
        let tail = f[0] * (x * x / a + 2.0 * x / (a * a) + 2.0 / (a * a * a));
        let w = if i == 0 { 0.0 } else { 0.5 * h };
        let body = if i == 0 {
            0.0
        } else {
            let (e0, e1, e2) = (m0 + w * f[i], m1 + w * x * f[i], m2 + w * x * x * f[i]);
            (x * x * e0 - 2.0 * x * e1 + e2).max(0.0)
        };
        out.push(body + tail);
        let wi = if i == 0 { 0.5 * h } else { h };
        m0 += wi * f[i];
        m1 += wi * x * f[i];
        m2 += wi * x * x * f[i];
    }
    out
}

fn apply(f: &[f64], t: &[f64], h: f64, lambda: f64, a: f64) -> Vec<f64> {
    memory(f, t, h, a)
        .into_iter()
        .map(|m| -(-lambda * m).exp_m1())
        .collect()
}

/// Sup-norm residual of `values` in the discrete equation.
pub fn fquad_residual(lambda: f64, grid: FquadGrid, values: &[f64]) -> f64 {
    let t = grid_times(grid);
    let a = (2.0 * lambda).cbrt();
    apply(values, &t, grid.h, lambda, a)
        .iter()
        .zip(values)
        .map(|(g, f)| (g - f).abs())
        .fold(0.0, f64::max)
}

fn grid_times(grid: FquadGrid) -> Vec<f64> {
    let n = ((grid.t_max - grid.t_min) / grid.h).round() as usize + 1;
    (0..n).map(|i| grid.t_min + i as f64 * grid.h).collect()
}

pub fn solve_fquad(lambda: f64, grid: FquadGrid) -> Result<FquadSolution> {
    solve_fquad_with(lambda, grid, FquadOptions::default())
}

/// Damped fixed-point iteration from a logistic start, recentered at every
/// step so the time-shift mode cannot drift.
pub fn solve_fquad_with(lambda: f64, grid: FquadGrid, opts: FquadOptions) -> Result<FquadSolution> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain {
            what: "lambda",
            value: lambda,
            expected: "> 0",
        });
    }
    if !(grid.t_min < 0.0 && grid.t_max > 0.0 && grid.h > 0.0 && grid.h < grid.t_max - grid.t_min) {
        return Err(Error::Invalid(
            "grid must straddle 0 with a positive step".into(),
        ));
    }
    let t = grid_times(grid);
    let a = (2.0 * lambda).cbrt();
    if !(opts.start_width > 0.0 && opts.start_width.is_finite()) {
        return Err(Error::Domain {
            what: "start_width",
            value: opts.start_width,
            expected: "> 0",
        });
    }
    let mut f: Vec<f64> = t
        .iter()
        .map(|&x| logistic(a * x / opts.start_width))
        .collect();
    let mut projections = 0;
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    // Recentering interpolates, which puts a floor under the residual;
    // stop once it is acceptable and no longer improving.
    let (mut best, mut since_best) = (f64::INFINITY, 0);
    while iterations < opts.max_iterations {
        let g = apply(&f, &t, grid.h, lambda, a);
        residual = g
            .iter()
            .zip(&f)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        if residual < opts.tolerance {
            break;
        }
        if residual < 0.9 * best {
            best = residual;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= 50 && residual < 1e-6 {
                break;
            }
        }
        for (x, y) in f.iter_mut().zip(&g) {
            *x += opts.damping * (y - *x);
        }
        if f.windows(2).any(|w| w[1] < w[0]) {
            projections += 1;
            for i in 1..f.len() {
                f[i] = f[i].max(f[i - 1]);
            }
        }
        let mid = crossing(&t, &f, 0.5);
        let shifted: Vec<f64> = t
            .iter()
            .map(|&x| {
                let y = x + mid;
                if y < t[0] {
                    f[0] * (a * (y - t[0])).exp()
                } else {
                    interpolate(&t, &f, y)
                }
            })
            .collect();
        f = shifted;
        iterations += 1;
    }
    if residual >= 1e-6 {
        return Err(Error::Convergence {
            solver: "fquad",
            iterations,
            residual,
        });
    }
    if f[0] >= 1e-4 || f[f.len() - 1] <= 1.0 - 1e-4 {
        return Err(Error::Invalid(format!(
            "grid too narrow: F runs from {:.3e} to {:.6}",
            f[0],
            f[f.len() - 1]
        )));
    }
    Ok(FquadSolution {
        lambda,
        grid,
        values: f,
        residual,
        iterations,
        projections,
        tail_rate: a,
        cumulative: Vec::new(),
    }
    .with_cumulative())
}

/// `t ↦ F₁(A^{1/3} θ_far^{1/3} θ_near^{2/3} t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCdf {
    pub scale: f64,
    pub base: FquadSolution,
}

impl LimitCdf {
    pub fn eval(&self, t: f64) -> f64 {
        self.base.eval(self.scale * t)
    }

    pub fn quantile(&self, y: f64) -> f64 {
        self.base.quantile(y) / self.scale
    }

    pub fn window(&self, lo: f64, hi: f64) -> f64 {
        self.quantile(hi) - self.quantile(lo)
    }
}

/// Receipt-time law of short-long percolation with near rate `near`, far
/// rate `far` and limit-shape area `area`, given the `λ = 1` solution.
pub fn fpp_limit_cdf(near: f64, far: f64, area: f64, f1: &FquadSolution) -> Result<LimitCdf> {
    for (what, v) in [("theta_near", near), ("theta_far", far), ("area", area)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Domain {
                what,
                value: v,
                expected: "> 0",
            });
        }
    }
    if f1.lambda != 1.0 {
        return Err(Error::Invalid(
            "base solution must be for lambda = 1".into(),
        ));
    }
    Ok(LimitCdf {
        scale: (area * far).cbrt() * near.powf(2.0 / 3.0),
        base: f1.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_at_unit_lambda() {
        let s = solve_fquad(1.0, FquadGrid::default()).unwrap();
        assert!(s.residual < 1e-6, "residual {}", s.residual);
        assert_eq!(s.projections, 0);
        assert!((s.eval(0.0) - 0.5).abs() < 1e-9);
        assert!(s.values.windows(2).all(|w| w[1] >= w[0]));
        let rate = s.fitted_tail_rate();
        assert!((rate / 2f64.cbrt() - 1.0).abs() < 0.02, "tail rate {rate}");
    }

    #[test]
    fn different_starts_reach_one_solution() {
        let g = FquadGrid::default();
        let base = solve_fquad(1.0, g).unwrap();
        for width in [0.5, 2.0] {
            let opts = FquadOptions {
                start_width: width,
                ..FquadOptions::default()
            };
            let s = solve_fquad_with(1.0, g, opts).unwrap();
            let sup = s
                .values
                .iter()
                .zip(&base.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(sup < 1e-6, "width {width}: {sup}");
        }
    }

    #[test]
    fn residual_matches_reported() {
        let g = FquadGrid::default();
        let s = solve_fquad(2.0, g).unwrap();
        assert!(fquad_residual(2.0, g, &s.values) <= s.residual * 10.0 + 1e-9);
    }

    #[test]
    fn quantile_inverts_eval() {
        let s = solve_fquad(1.0, FquadGrid::default()).unwrap();
        for y in [1e-9, 1e-3, 0.1, 0.5, 0.9, 0.999] {
            assert!((s.eval(s.quantile(y)) - y).abs() < 1e-9 * (1.0 + 1.0 / y));
        }
    }

    #[test]
    fn integral_to_matches_trapezoid() {
        let s = solve_fquad(1.0, FquadGrid::default()).unwrap();
        let direct: f64 = {
            let h = 1e-4;
            let n = 80_000;
            (0..n)
                .map(|i| s.eval(-8.0 + (i as f64 + 0.5) * h) * h)
                .sum::<f64>()
                + s.eval(-8.0) / s.tail_rate
        };
        assert!(
            (s.integral_to(0.0) - direct).abs() < 1e-5,
            "{} vs {direct}",
            s.integral_to(0.0)
        );
    }

    #[test]
    fn limit_cdf_scaling() {
        let f1 = solve_fquad(1.0, FquadGrid::default()).unwrap();
        let base = fpp_limit_cdf(1.0, 1.0, 1.0, &f1).unwrap();
        let doubled = fpp_limit_cdf(1.0, 1.0, 2.0, &f1).unwrap();
        let ratio = doubled.window(0.1, 0.9) / base.window(0.1, 0.9);
        assert!((ratio - 2f64.powf(-1.0 / 3.0)).abs() < 1e-9);
        let w = |near: f64, far: f64| fpp_limit_cdf(near, far, 1.0, &f1).unwrap().window(0.1, 0.9);
        assert!((w(8.0, 1.0) / w(1.0, 1.0) - 0.25).abs() < 1e-9);
        assert!((w(1.0, 8.0) / w(1.0, 1.0) - 0.5).abs() < 1e-9);
        assert!(fpp_limit_cdf(0.0, 1.0, 1.0, &f1).is_err());
    }
}
