use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig};

use super::*;
use crate::analytic_cg::{nash_finite_k, payoff_cg};
use crate::fquad::{solve_fquad, FquadGrid};
use crate::reward::FiniteKReward;

fn complete(n: usize) -> Topology {
    Topology::Complete { n }
}

fn uniform(rate: f64) -> Strategy {
    Strategy::Uniform { rate }
}

fn search(replicates: usize) -> SearchSpec {
    SearchSpec {
        replicates,
        ..SearchSpec::default()
    }
}

#[test]
fn default_grid_contains_one_and_zero() {
    let s = SearchSpec::default();
    assert!(s.validate().is_ok());
    assert_eq!(s.multipliers[0], 0.0);
    assert!(s.multipliers.last().unwrap() > &10.0);
    assert!(SearchSpec::coarse(10).validate().is_ok());
    let bad = SearchSpec {
        multipliers: vec![0.0, 0.5, 2.0],
        ..SearchSpec::default()
    };
    assert!(bad.validate().is_err());
}

#[test]
fn payoff_of_playing_the_profile_is_rbar_minus_cost() {
    let t = complete(10_000);
    let est = payoff_mc(
        &t,
        &RewardSpec::Linear,
        &uniform(0.5),
        &uniform(0.5),
        400,
        3,
        RewardEstimator::Conditional,
    )
    .unwrap();
    assert!((est.payoff - 0.5).abs() < 0.02, "{est:?}");
    assert_eq!(est.cost, 0.5);
    assert!((est.payoff - (est.reward - est.cost)).abs() < 1e-15);
}

#[test]
fn payoff_matches_complete_graph_formula() {
    let t = complete(10_000);
    let spec = RewardSpec::Linear;
    for phi in [0.25, 0.5, 1.0] {
        let est = payoff_mc(
            &t,
            &spec,
            &uniform(0.5),
            &uniform(phi),
            400,
            5,
            RewardEstimator::Conditional,
        )
        .unwrap();
        let exact = payoff_cg(&spec, phi, 0.5).unwrap();
        assert!(
            (est.payoff - exact).abs() < 0.02,
            "phi {phi}: {} vs {exact}",
            est.payoff
        );
    }
}

#[test]
fn silent_ego_earns_nothing() {
    let n = 10_000;
    let est = payoff_mc(
        &complete(n),
        &RewardSpec::Linear,
        &uniform(1.0),
        &uniform(0.0),
        50,
        1,
        RewardEstimator::Conditional,
    )
    .unwrap();
    assert_eq!(est.cost, 0.0);
    // Only the free receipt as source remains.
    let source_only = RewardSpec::Linear.rank_value(1, n) / n as f64;
    assert!((est.reward - source_only).abs() < 1e-12, "{est:?}");
}

#[test]
fn zero_profile_is_rejected() {
    let r = payoff_mc(
        &complete(10),
        &RewardSpec::Linear,
        &uniform(0.0),
        &uniform(1.0),
        5,
        1,
        RewardEstimator::Conditional,
    );
    assert!(matches!(r, Err(Error::ZeroSpread(_))));
}

#[test]
fn best_response_on_complete_graph() {
    let t = complete(10_000);
    let spec = RewardSpec::Linear;
    let at_nash = best_response(&t, &spec, &uniform(0.5), &search(400), 11).unwrap();
    let phi = at_nash.strategy.coords()[0];
    assert!((phi - 0.5).abs() < 0.05, "phi* = {phi}");
    assert!(at_nash.warnings.is_empty(), "{:?}", at_nash.warnings);

    // Under-calling neighbors make calling more worthwhile.
    let slope = crate::analytic_cg::payoff_cg_slope(&spec, 0.1, 0.1).unwrap();
    assert!(slope > 0.0);
    let low = best_response(&t, &spec, &uniform(0.1), &search(400), 11).unwrap();
    assert!(low.strategy.coords()[0] > 0.1);
}

#[test]
fn constant_reward_gives_no_reason_to_call() {
    let t = complete(500);
    for theta in [0.1, 1.0, 3.0] {
        let br = best_response(&t, &RewardSpec::Constant, &uniform(theta), &search(20), 2).unwrap();
        assert_eq!(br.strategy.coords(), vec![0.0]);
    }
}

#[test]
fn complete_graph_fixed_point_is_half() {
    let t = complete(2_000);
    let opts = NashOptions {
        search: search(600),
        ..NashOptions::default()
    };
    let est = nash_fixed_point(&t, &RewardSpec::Linear, &uniform(1.0), &opts, 7).unwrap();
    let theta = est.strategy.coords()[0];
    assert!((theta - 0.5).abs() < 0.05, "{est:?}");
    assert_eq!(est.classification, Efficiency::Wasteful);
    assert!(est.residual < 1e-4);
    assert!(!est.trace.is_empty());
}

#[test]
fn constant_reward_equilibrium_is_silence() {
    let est = nash_fixed_point(
        &complete(200),
        &RewardSpec::Constant,
        &uniform(1.0),
        &NashOptions {
            search: search(10),
            ..NashOptions::default()
        },
        1,
    )
    .unwrap();
    assert_eq!(est.strategy, uniform(0.0));
    assert_eq!(est.classification, Efficiency::Efficient);
}

#[test]
fn finite_k_fixed_point_matches_exact_rate() {
    // Payoff is nearly linear in ego's rate, so best responses jump.
    let n = 1_000;
    for k in [2usize, 4] {
        let spec = FiniteKReward::new(k, n).unwrap().as_spec(n);
        let opts = NashOptions {
            search: search(3000),
            ..NashOptions::default()
        };
        let est = nash_fixed_point(&complete(n), &spec, &uniform(1.0), &opts, 9).unwrap();
        let exact = nash_finite_k(n, k).unwrap();
        let theta = est.strategy.coords()[0];
        assert!(
            (theta - exact.theta).abs() < 0.04,
            "k {k}: {theta} vs {}",
            exact.theta
        );
    }
}

#[test]
fn classification_cuts() {
    assert_eq!(classify(0.97, 0.01, 1.0), (Efficiency::Efficient, false));
    assert_eq!(classify(0.5, 0.01, 1.0), (Efficiency::Wasteful, false));
    assert_eq!(
        classify(0.02, 0.01, 1.0),
        (Efficiency::TotallyWasteful, false)
    );
    assert_eq!(classify(0.9, 0.01, 1.0), (Efficiency::Wasteful, true));
    assert_eq!(classify(0.1, 0.05, 1.0), (Efficiency::Wasteful, true));
}

#[test]
fn short_long_closed_form_orders() {
    let f1 = solve_fquad(1.0, FquadGrid::default()).unwrap();
    let spec = RewardSpec::Linear;
    let (area, z) = (1.1, -0.9);
    let sols: Vec<ShortLongNash> = [1e2, 1e3, 1e4]
        .iter()
        .map(|&c| nash_short_long(&spec, c, area, z, &f1, None).unwrap())
        .collect();
    let cs: Vec<f64> = sols.iter().map(|s| s.far_cost).collect();
    let slope = |ys: Vec<f64>| crate::stats::fit_loglog(&cs, &ys).slope;
    assert!((slope(sols.iter().map(|s| s.theta_far).collect()) + 2.0).abs() < 1e-9);
    assert!((slope(sols.iter().map(|s| s.theta_near).collect()) + 0.5).abs() < 1e-9);
    assert!((slope(sols.iter().map(|s| s.window).collect()) - 1.0).abs() < 1e-6);
    for s in &sols {
        assert!(s.theta_far < s.theta_near && s.theta_near > 0.0 && s.theta_far > 0.0);
        assert!(s.i1 > 0.0 && s.i2 > 0.0);
        // Both balance conditions hold at the solution.
        let scale = (s.area * s.theta_far).cbrt() * s.theta_near.powf(2.0 / 3.0);
        assert!((s.far_cost - s.i1 / scale).abs() < 1e-9 * s.far_cost);
        assert!((s.theta_near.powi(2) - scale * z.abs() * s.i2).abs() < 1e-12);
    }
    assert!(sols[2].cost < sols[0].cost);
    assert!(matches!(
        nash_short_long(&spec, 5e3, area, z, &f1, Some(64)),
        Err(Error::Regime { .. })
    ));
    assert!(nash_short_long(&spec, 0.5, area, z, &f1, None).is_err());
}

#[test]
fn expensive_far_calls_are_not_used() {
    let t = Topology::TorusShortLong {
        side: 16,
        far_cost: 1e7,
    };
    let profile = Strategy::NearFar {
        near: 1.0,
        far: 1e-4,
    };
    let br = best_response(
        &t,
        &RewardSpec::Linear,
        &profile,
        &SearchSpec::coarse(60),
        3,
    )
    .unwrap();
    assert_eq!(br.strategy.coords()[1], 0.0);
    assert!(br.strategy.coords()[0] > 0.0);
}

#[test]
fn distance_cost_experiment_reports_finite_support() {
    let costs: Vec<f64> = (1..=8).map(|d| (d * d) as f64).collect();
    let opts = DistanceCostOptions {
        nash: NashOptions {
            search: SearchSpec::coarse(200),
            tolerance: 0.05,
            max_iterations: 60,
            ..NashOptions::default()
        },
        d_max: 4,
        window_runs: 4,
        ..DistanceCostOptions::default()
    };
    let rows = distance_cost_efficiency(&RewardSpec::Linear, &costs, &[8, 12], &opts, 5).unwrap();
    assert_eq!(rows.len(), 2);
    for row in &rows {
        assert!(row.support >= 1 && row.support <= row.d_max, "{row:?}");
        assert!(row.rates[0] > 0.0);
        assert!(row.window > 0.0);
        let cost: f64 = row.rates.iter().zip(&costs).map(|(r, c)| r * c).sum();
        assert!((cost - row.total_cost).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn classification_is_exhaustive_and_exclusive(p in -0.5f64..1.5, se in 0.0f64..0.3) {
        let (c, ambiguous) = classify(p, se, 1.0);
        let lo = p - 2.0 * se;
        let hi = p + 2.0 * se;
        match c {
            Efficiency::Efficient => prop_assert!(lo >= 0.9),
            Efficiency::TotallyWasteful => prop_assert!(hi <= 0.1),
            Efficiency::Wasteful => prop_assert!(lo < 0.9 && hi > 0.1),
        }
        prop_assert_eq!(ambiguous, c == Efficiency::Wasteful && (hi > 0.9 || lo < 0.1));
    }

    #[test]
    fn more_calls_never_delay_receipt(seed in 0u64..1000, a in 0.05f64..3.0, b in 0.05f64..3.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let t = complete(300);
        let p = probe(&t, &uniform(1.0), 0, seed).unwrap();
        prop_assert!(p.sampled_rank(&[hi]) <= p.sampled_rank(&[lo]));
        let spec = RewardSpec::Linear;
        prop_assert!(p.conditional_reward(&spec, &[hi]) >= p.conditional_reward(&spec, &[lo]) - 1e-12);
    }
}
