//! Complete graph where each agent calls at regular intervals.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;

use super::{RunResult, Spread};
use crate::error::{Error, Result};
use crate::rng::{open_unit, stream, STREAM_POPULATION};

/// Every agent calls a uniform other agent at times `phase + m / rate`,
/// with its phase uniform on `[0, 1 / rate)`. A caller learns the item if
/// the callee already has it.
pub fn percolate_regular(n: usize, rate: f64, seed: u64) -> Result<RunResult> {
    if n < 2 {
        return Err(Error::Topology(format!(
            "complete graph needs n >= 2, got {n}"
        )));
    }
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::ZeroSpread(format!(
            "call rate must be positive, got {rate}"
        )));
    }
    let period = 1.0 / rate;
    let mut rng = stream(seed, STREAM_POPULATION);
    let source = rng.random_range(0..n);
    let mut time = vec![f64::INFINITY; n];
    time[source] = 0.0;
    let mut order = vec![source];

    // Times as bit patterns: nonnegative finite f64 order like their bits.
    let mut heap = BinaryHeap::with_capacity(n);
    for a in 0..n {
        let phase = open_unit(rng.random::<u64>()) * period;
        if a != source {
            heap.push(Reverse((phase.to_bits(), a)));
        }
    }
    while let Some(Reverse((bits, a))) = heap.pop() {
        let t = f64::from_bits(bits);
        let mut callee = rng.random_range(0..n - 1);
        if callee >= a {
            callee += 1;
        }
        if time[callee] < t {
            time[a] = t;
            order.push(a);
        } else {
            heap.push(Reverse(((t + period).to_bits(), a)));
        }
    }
    RunResult::from_spread(
        Spread {
            time,
            order,
            source,
        },
        None,
        seed,
    )
}
