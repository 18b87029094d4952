//! Gillespie race on the complete graph.

use rand::Rng;
use rand_distr::Exp1;

use super::Spread;
use crate::rng::{stream, STREAM_EGO, STREAM_POPULATION};

/// With `k` informed agents each uninformed non-ego agent succeeds at rate
/// `rate * k / (n - 1)`. Ego succeeds once `ego_rate * ∫ k/(n-1) dt` crosses
/// its own Exp(1) threshold.
///
/// With `include_ego == false` ego is never informed; the draws made before
/// ego's receipt are identical in both modes.
pub(crate) fn run(
    n: usize,
    rate: f64,
    ego: Option<(usize, &[f64])>,
    include_ego: bool,
    seed: u64,
) -> Spread {
    let mut rng = stream(seed, STREAM_POPULATION);
    let source = rng.random_range(0..n);
    let threshold: f64 = stream(seed, STREAM_EGO).sample(Exp1);
    let (ego_agent, ego_rate) = match ego {
        Some((a, r)) => (Some(a), r[0]),
        None => (None, 0.0),
    };

    let mut time = vec![f64::INFINITY; n];
    let mut order = Vec::with_capacity(n);
    time[source] = 0.0;
    order.push(source);
    let mut uninformed: Vec<usize> = (0..n)
        .filter(|&a| a != source && Some(a) != ego_agent)
        .collect();
    let mut ego_pending =
        matches!(ego_agent, Some(a) if a != source) && include_ego && ego_rate > 0.0;
    let mut informed = 1usize;
    let mut hazard = 0.0;
    let mut now = 0.0;
    let others = (n - 1) as f64;

    loop {
        let m = uninformed.len();
        let frac = informed as f64 / others;
        let lam = rate * m as f64 * frac;
        let t_pop = if m > 0 && lam > 0.0 {
            let e: f64 = rng.sample(Exp1);
            now + e / lam
        } else {
            f64::INFINITY
        };
        let t_ego = if ego_pending {
            now + (threshold - hazard).max(0.0) / (ego_rate * frac)
        } else {
            f64::INFINITY
        };
        if t_ego.is_infinite() && t_pop.is_infinite() {
            break;
        }
        if t_ego < t_pop {
            let a = ego_agent.expect("ego pending");
            hazard = threshold;
            now = t_ego;
            time[a] = now;
            order.push(a);
            ego_pending = false;
        } else {
            hazard += ego_rate * frac * (t_pop - now);
            now = t_pop;
            let a = uninformed.swap_remove(rng.random_range(0..m));
            time[a] = now;
            order.push(a);
        }
        informed += 1;
    }
    Spread {
        time,
        order,
        source,
    }
}
