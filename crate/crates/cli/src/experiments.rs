//! One function per experiment kind.

use anyhow::{anyhow, Result};
use gossipfpp::analytic_cg::{
    logistic, nash_audience, nash_cg, nash_finite_k, nash_symmetric, payoff_cg,
    regular_calls_fixed_point, DeviantLaw, PeriodGrid,
};
use gossipfpp::fquad::{solve_fquad, solve_fquad_with};
use gossipfpp::lattice::{
    estimate_shape, estimate_z, nash_torus_nn, sample_tau, uniform_rank_check, ShapeEstimate,
};
use gossipfpp::nash::{
    best_response, distance_cost_efficiency, nash_fixed_point, nash_short_long,
    DistanceCostOptions, NashOptions, SearchSpec,
};
use gossipfpp::rng::derive_seed;
use gossipfpp::stats::{ks_statistic, Moments};
use gossipfpp::{percolate, percolate_regular, spread_stats, Strategy, Topology};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{AnalyticParams, ExperimentConfig, LatticeParams, NashMethod, ShapeParams};
use crate::output::{num, Outcome, Table};

pub fn simulate(cfg: &ExperimentConfig) -> Result<Outcome> {
    let topology = cfg.topology()?;
    let profile = cfg.profile()?;
    let params = cfg.simulate.clone().unwrap_or_default();
    let [lo, hi] = params.window;
    let seed = cfg.seed();
    let rate = match profile {
        Strategy::Uniform { rate } => Some(rate),
        _ => None,
    };
    let complete = matches!(topology, Topology::Complete { .. });

    let results = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let s = derive_seed(seed, r);
            let run = if params.regular {
                let rate = rate.ok_or_else(|| anyhow!("regular calls need a uniform strategy"))?;
                percolate_regular(topology.agents(), rate, s)?
            } else {
                percolate(topology, &profile, cfg.ego.as_ref(), s)?
            };
            let stats = spread_stats(&run, lo, hi)?;
            // Exponential clocks on the complete graph: recentered times
            // against the logistic law.
            let ks = match (complete && !params.regular, rate) {
                (true, Some(theta)) => {
                    let shifted: Vec<f64> = stats
                        .sorted_times()
                        .iter()
                        .map(|t| theta * (t - stats.median))
                        .collect();
                    Some(ks_statistic(&shifted, logistic))
                }
                _ => None,
            };
            let ego_rank = cfg.ego.as_ref().map(|e| run.rank[e.agent]);
            Ok((s, run, stats, ks, ego_rank))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut runs = Table::new(
        "runs",
        &[
            "replicate",
            "seed",
            "source",
            "t_lo",
            "t_hi",
            "median",
            "window",
            "ks_logistic",
            "ego_rank",
        ],
    );
    let mut windows = Moments::default();
    let mut kss = Moments::default();
    let mut ranks = Moments::default();
    for (r, (s, run, stats, ks, ego_rank)) in results.iter().enumerate() {
        windows.push(stats.window);
        if let Some(k) = ks {
            kss.push(*k);
        }
        if let Some(k) = ego_rank {
            ranks.push(*k as f64 / run.agents() as f64);
        }
        runs.row(vec![
            r.to_string(),
            s.to_string(),
            run.source.to_string(),
            num(stats.t_lo),
            num(stats.t_hi),
            num(stats.median),
            num(stats.window),
            ks.map(num).unwrap_or_default(),
            ego_rank.map(|k| k.to_string()).unwrap_or_default(),
        ]);
    }
    let mut out = Outcome::new(json!({
        "agents": topology.agents(),
        "replicates": cfg.replicates,
        "window": [lo, hi],
        "window_mean": windows.mean,
        "window_stderr": windows.stderr(),
        "ks_logistic_mean": (kss.count > 0).then_some(kss.mean),
        "ego_normalized_rank_mean": (ranks.count > 0).then_some(ranks.mean),
        "ego_normalized_rank_stderr": (ranks.count > 0).then(|| ranks.stderr()),
    }))?
    .with(runs);
    if params.receipts {
        let run = &results[0].1;
        let mut t = Table::new("receipts", &["id", "receipt_time", "rank"]);
        for (id, (time, rank)) in run.receipt_time.iter().zip(&run.rank).enumerate() {
            t.row(vec![id.to_string(), num(*time), rank.to_string()]);
        }
        out = out.with(t);
    }
    Ok(out)
}

pub fn analytic(cfg: &ExperimentConfig) -> Result<Outcome> {
    let params = cfg
        .analytic
        .as_ref()
        .ok_or_else(|| anyhow!("missing [analytic]"))?;
    Ok(match params {
        AnalyticParams::NashCg => Outcome::new(nash_cg(&cfg.reward_spec()?)?)?,
        AnalyticParams::PayoffCurve { theta, phis } => {
            let spec = cfg.reward_spec()?;
            let mut t = Table::new("payoff_curve", &["phi", "payoff"]);
            for &phi in phis {
                t.row(vec![num(phi), num(payoff_cg(&spec, phi, *theta)?)]);
            }
            Outcome::new(json!({ "theta": theta, "points": phis.len() }))?.with(t)
        }
        AnalyticParams::DeviantRank { phi, theta, points } => {
            let law = DeviantLaw::new(*phi, *theta)?;
            let m = (*points).max(2);
            let mut t = Table::new("rank_cdf", &["u", "cdf"]);
            for i in 0..m {
                let u = i as f64 / (m - 1) as f64;
                t.row(vec![num(u), num(law.rank_cdf(u))]);
            }
            Outcome::new(
                json!({ "phi": phi, "theta": theta, "median_rank_cdf": law.rank_cdf(0.5) }),
            )?
            .with(t)
        }
        AnalyticParams::FiniteK { n, k } => Outcome::new(nash_finite_k(*n, *k)?)?,
        AnalyticParams::Symmetric { theta_asy } => Outcome::new(json!({
            "theta_asy": theta_asy,
            "theta": nash_symmetric(*theta_asy)?,
        }))?,
        AnalyticParams::Audience { c } => {
            Outcome::new(json!({ "c": c, "theta": nash_audience(*c)? }))?
        }
        AnalyticParams::RegularCalls { theta } => {
            let law = regular_calls_fixed_point(*theta, PeriodGrid::default())?;
            let mut t = Table::new("regular_cdf", &["t", "cdf"]);
            for (x, f) in law.times.iter().zip(&law.cdf) {
                t.row(vec![num(*x), num(*f)]);
            }
            Outcome::new(json!({
                "theta": law.theta,
                "residual": law.residual,
                "iterations": law.iterations,
                "method": law.method,
            }))?
            .with(t)
        }
    })
}

pub fn fquad(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p = cfg.fquad.clone().unwrap_or_default();
    let sol = solve_fquad_with(p.lambda, p.grid, p.options)?;
    let mut t = Table::new("fquad", &["t", "F", "density"]);
    for (x, f) in sol.times().iter().zip(&sol.values) {
        t.row(vec![num(*x), num(*f), num(sol.density(*x))]);
    }
    Ok(Outcome::new(json!({
        "lambda": sol.lambda,
        "residual": sol.residual,
        "iterations": sol.iterations,
        "projections": sol.projections,
        "tail_rate": sol.tail_rate,
        "fitted_tail_rate": sol.fitted_tail_rate(),
        "window": sol.quantile(0.9) - sol.quantile(0.1),
    }))?
    .with(t))
}

fn shape(p: &ShapeParams, seed: u64) -> Result<ShapeEstimate> {
    Ok(estimate_shape(p.half_width, p.s_max, p.replicates, seed)?)
}

fn shape_tables(s: &ShapeEstimate) -> (Table, Table) {
    let bins = s.radial.len();
    let mut radial = Table::new("shape", &["angle", "radius"]);
    for (b, r) in s.radial.iter().enumerate() {
        let angle = (b as f64 + 0.5) * std::f64::consts::TAU / bins as f64;
        radial.row(vec![num(angle), num(*r)]);
    }
    let mut q = Table::new("q", &["s", "q"]);
    for (x, y) in s.q_s.iter().zip(&s.q) {
        q.row(vec![num(*x), num(*y)]);
    }
    (radial, q)
}

pub fn lattice(cfg: &ExperimentConfig) -> Result<Outcome> {
    let params = cfg
        .lattice
        .as_ref()
        .ok_or_else(|| anyhow!("missing [lattice]"))?;
    let seed = cfg.seed();
    let reps = cfg.replicates;
    match params {
        LatticeParams::Shape { half_width, s_max } => {
            let s = estimate_shape(*half_width, *s_max, reps, seed)?;
            let (radial, q) = shape_tables(&s);
            Ok(Outcome::new(json!({
                "area": s.area,
                "area_stderr": s.area_stderr,
                "area_half": s.area_half,
                "l1_inner": s.l1_inner,
                "l1_outer": s.l1_outer,
                "hull_excess": s.hull_excess,
            }))?
            .with(radial)
            .with(q))
        }
        LatticeParams::Tau { r } => {
            let samples = sample_tau(*r, reps, seed)?;
            let mut t = Table::new(
                "tau",
                &[
                    "replicate",
                    "gap_px",
                    "gap_mx",
                    "gap_py",
                    "gap_my",
                    "first",
                    "distance",
                    "direction",
                ],
            );
            let mut mean = [Moments::default(); 4];
            for (i, s) in samples.iter().enumerate() {
                let mut cells = vec![i.to_string()];
                for (g, m) in s.gaps.iter().zip(mean.iter_mut()) {
                    m.push(*g);
                    cells.push(num(*g));
                }
                cells.extend([num(s.first), num(s.distance), num(s.direction)]);
                t.row(cells);
            }
            Ok(Outcome::new(json!({
                "r": r,
                "samples": samples.len(),
                "gap_mean": mean.iter().map(|m| m.mean).collect::<Vec<_>>(),
                "gap_stderr": mean.iter().map(|m| m.stderr()).collect::<Vec<_>>(),
            }))?
            .with(t))
        }
        LatticeParams::Z {
            r,
            lambdas,
            draws,
            shape: sp,
        } => {
            let samples = sample_tau(*r, reps, derive_seed(seed, 0))?;
            let s = sp
                .as_ref()
                .map(|p| shape(p, derive_seed(seed, 1)))
                .transpose()?;
            let z = estimate_z(&samples, lambdas, *draws, s.as_ref(), derive_seed(seed, 2))?;
            let mut out = Outcome::new(&z)?.with(z_table(&z.lambdas, &z.z, &z.z_stderr));
            if let Some(bins) = &z.g_bins {
                out = out.with(g_table(bins));
            }
            Ok(out)
        }
        LatticeParams::NashNn {
            sides,
            r,
            lambdas,
            draws,
            shape: sp,
        } => {
            let spec = cfg.reward_spec()?;
            let samples = sample_tau(*r, reps, derive_seed(seed, 0))?;
            let s = shape(sp, derive_seed(seed, 1))?;
            let z = estimate_z(&samples, lambdas, *draws, Some(&s), derive_seed(seed, 2))?;
            let mut t = Table::new("nash_nn", &["side", "theta", "theta_times_side"]);
            let mut thetas = Vec::new();
            for &n in sides {
                let theta = nash_torus_nn(&spec, &z, n)?;
                thetas.push(theta);
                t.row(vec![n.to_string(), num(theta), num(theta * n as f64)]);
            }
            let bins = z.g_bins.clone().unwrap_or_default();
            Ok(Outcome::new(json!({
                "sides": sides,
                "theta": thetas,
                "z_prime": z.z_prime,
                "z_prime_stderr": z.z_prime_stderr,
                "area": s.area,
            }))?
            .with(t)
            .with(g_table(&bins)))
        }
        LatticeParams::UniformRank { side } => {
            let check = uniform_rank_check(*side, reps, seed)?;
            let mut t = Table::new("ranks", &["normalized_rank"]);
            for x in &check.normalized {
                t.row(vec![num(*x)]);
            }
            Ok(
                Outcome::new(json!({ "side": check.side, "ks": check.ks, "replicates": reps }))?
                    .with(t),
            )
        }
    }
}

fn z_table(lambdas: &[f64], z: &[f64], se: &[f64]) -> Table {
    let mut t = Table::new("z", &["lambda", "z", "z_stderr"]);
    for ((l, v), s) in lambdas.iter().zip(z).zip(se) {
        t.row(vec![num(*l), num(*v), num(*s)]);
    }
    t
}

fn g_table(bins: &[gossipfpp::lattice::GBin]) -> Table {
    let mut t = Table::new("g", &["u_lo", "u_hi", "count", "g", "g_stderr"]);
    for b in bins {
        t.row(vec![
            num(b.u_lo),
            num(b.u_hi),
            b.count.to_string(),
            num(b.g),
            num(b.g_stderr),
        ]);
    }
    t
}

fn search(cfg: &ExperimentConfig, coarse: bool) -> SearchSpec {
    let p = cfg.nash.clone().unwrap_or_default();
    let base = if coarse {
        SearchSpec::coarse(cfg.replicates)
    } else {
        SearchSpec {
            replicates: cfg.replicates,
            ..SearchSpec::default()
        }
    };
    SearchSpec {
        multipliers: p.multipliers.unwrap_or(base.multipliers),
        estimator: p.estimator,
        ..base
    }
}

pub fn nash(cfg: &ExperimentConfig) -> Result<Outcome> {
    let topology = cfg.topology()?;
    let spec = cfg.reward_spec()?;
    let p = cfg.nash.clone().unwrap_or_default();
    let seed = cfg.seed();
    let vector = topology.coordinates() > 1;
    let opts = NashOptions {
        search: search(cfg, vector),
        damping: p.damping,
        max_iterations: p.max_iterations,
        tolerance: p.tolerance,
        ..NashOptions::default()
    };
    match p.method {
        NashMethod::FixedPoint => {
            let est = nash_fixed_point(topology, &spec, &cfg.profile()?, &opts, seed)?;
            let rates = est.strategy.coords();
            let mut t = Table::new(
                "trace",
                &[
                    "iteration",
                    "coordinate",
                    "theta",
                    "response",
                    "residual",
                    "damping",
                ],
            );
            for (i, step) in est.trace.iter().enumerate() {
                for (g, (th, re)) in step.theta.iter().zip(&step.response).enumerate() {
                    t.row(vec![
                        (i + 1).to_string(),
                        g.to_string(),
                        num(*th),
                        num(*re),
                        num(step.residual),
                        num(step.damping),
                    ]);
                }
            }
            let mut summary = serde_json::to_value(&est)?;
            summary["rates"] = json!(rates);
            if let Some(side) = topology.side() {
                summary["theta_times_side"] = json!(rates[0] * side as f64);
            }
            Ok(Outcome::new(summary)?.with(t))
        }
        NashMethod::BestResponse => {
            let br = best_response(topology, &spec, &cfg.profile()?, &opts.search, seed)?;
            let mut t = Table::new(
                "curves",
                &["coordinate", "rate", "reward", "reward_stderr", "payoff"],
            );
            for c in &br.curves {
                for i in 0..c.rates.len() {
                    t.row(vec![
                        c.coordinate.to_string(),
                        num(c.rates[i]),
                        num(c.reward[i]),
                        num(c.reward_stderr[i]),
                        num(c.payoff[i]),
                    ]);
                }
            }
            Ok(Outcome::new(json!({
                "strategy": br.strategy,
                "rates": br.strategy.coords(),
                "gain": br.gain,
                "gain_stderr": br.gain_stderr,
                "resolution": br.resolution,
                "warnings": br.warnings,
            }))?
            .with(t))
        }
        NashMethod::ShortLong => {
            let Topology::TorusShortLong { side, far_cost } = topology else {
                return Err(anyhow!("short_long method needs a short-long torus"));
            };
            let f1 = solve_fquad(1.0, p.fquad_grid)?;
            let area = p.area.ok_or_else(|| anyhow!("nash.area missing"))?;
            let z = p.z_prime.ok_or_else(|| anyhow!("nash.z_prime missing"))?;
            Ok(Outcome::new(nash_short_long(
                &spec,
                *far_cost,
                area,
                z,
                &f1,
                Some(*side),
            )?)?)
        }
        NashMethod::DistanceCost => {
            let Topology::TorusDistanceCost { side, costs } = topology else {
                return Err(anyhow!("distance_cost method needs a distance-cost torus"));
            };
            let sides = if p.sides.is_empty() {
                vec![*side]
            } else {
                p.sides.clone()
            };
            let dc = DistanceCostOptions {
                nash: NashOptions {
                    tolerance: p.tolerance.max(0.02),
                    ..opts
                },
                d_max: p.d_max,
                support_share: p.support_share,
                window_runs: p.window_runs,
            };
            let rows = distance_cost_efficiency(&spec, costs, &sides, &dc, seed)?;
            let mut t = Table::new("distance_rates", &["side", "d", "rate"]);
            for row in &rows {
                for (d, r) in row.rates.iter().enumerate() {
                    t.row(vec![row.side.to_string(), (d + 1).to_string(), num(*r)]);
                }
            }
            Ok(Outcome::new(json!({ "rows": rows }))?.with(t))
        }
    }
}
