//! Seed derivation and random streams.
//!
//! Every random quantity in a run is a deterministic function of one `u64`
//! seed. Replicate seeds come from a master seed through a counter mix, so
//! replicate `i` sees the same numbers regardless of how replicates are
//! scheduled across threads.
//!
//! Two kinds of randomness are used:
//!
//! * sequential ChaCha streams (`stream(seed, id)`) for Gillespie races;
//! * keyed per-edge exponentials ([`EdgeClock`]) for Dijkstra-style
//!   percolation, so the passage time of a directed call channel does not
//!   depend on the order in which the simulation visits it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream ids used inside one run.
pub(crate) const STREAM_POPULATION: u64 = 0;
pub(crate) const STREAM_EGO: u64 = 1;
pub(crate) const STREAM_AUX: u64 = 2;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(master ^ mix64(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

pub fn stream(seed: u64, id: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Map 64 random bits to a uniform in the open interval (0, 1).
#[inline]
pub(crate) fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Unit-rate exponential passage times keyed by directed channel.
#[derive(Debug, Clone, Copy)]
pub struct EdgeClock {
    key: u64,
}

impl EdgeClock {
    pub fn new(seed: u64) -> Self {
        Self {
            key: mix64(seed ^ 0x5EED_ED6E_C10C_0000),
        }
    }

    /// Exp(1) time for information to cross from `from` to `to`.
    #[inline]
    pub fn unit_exp(&self, from: usize, to: usize) -> f64 {
        let h = mix64(mix64(self.key ^ from as u64) ^ (to as u64).wrapping_mul(GOLDEN));
        -open_unit(h).ln()
    }
}
