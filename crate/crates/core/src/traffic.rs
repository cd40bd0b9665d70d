//! Random contention-period instances: activation, degree draws and replica
//! placement, plus the seed-driven placement a receiver can recompute.

use std::collections::HashMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use thiserror::Error;

use crate::model::{ContentionGraph, DegreeDistribution};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrafficError {
    #[error("degree {degree} exceeds the {num_slots} slots of the frame")]
    DegreeExceedsFrame { degree: usize, num_slots: usize },
    #[error("activation probability {0} not in (0, 1]")]
    BadActivation(f64),
}

/// Deterministic pseudorandom stream for one trial.
///
/// ChaCha8 keyed from a 64-bit seed; the stream is platform independent.
#[derive(Debug, Clone)]
pub struct SimRng(ChaCha8Rng);

impl SimRng {
    pub fn from_seed(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Independent stream for trial `trial` of load point `point`, keyed by
    /// `derive_seed([master, point, trial])`.
    pub fn for_trial(master: u64, point: u64, trial: u64) -> Self {
        Self::from_seed(derive_seed(&[master, point, trial]))
    }
}

impl RngCore for SimRng {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const MODULUS_KEY: u64 = 0xd6e8_feb8_6659_fd93;
const COUNTER_KEY: u64 = 0xa076_1d64_78bd_642f;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a tuple of words into one seed:
/// `h₀ = GOLDEN`, `hᵢ₊₁ = mix64(hᵢ ⊕ (xᵢ + GOLDEN·(i+1)))`.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().enumerate().fold(GOLDEN, |h, (i, &x)| {
        mix64(h ^ x.wrapping_add(GOLDEN.wrapping_mul(i as u64 + 1)))
    })
}

/// Counter-mode word stream behind [`replica_slots_from_seed`]:
/// `word(c) = mix64(mix64(seed ⊕ M·K₁) ⊕ c·K₂)`.
struct SeedStream {
    key: u64,
    counter: u64,
}

impl SeedStream {
    fn new(seed: u64, modulus: u64) -> Self {
        Self {
            key: mix64(seed ^ modulus.wrapping_mul(MODULUS_KEY)),
            counter: 0,
        }
    }

    fn next_word(&mut self) -> u64 {
        let w = mix64(self.key ^ self.counter.wrapping_mul(COUNTER_KEY));
        self.counter += 1;
        w
    }

    /// Uniform in `[0, n)`: words at or above the largest multiple of `n`
    /// are rejected, the rest are reduced mod `n`.
    fn below(&mut self, n: u64) -> u64 {
        let zone = u64::MAX - (u64::MAX % n + 1) % n;
        loop {
            let w = self.next_word();
            if w <= zone {
                return w % n;
            }
        }
    }
}

/// Recomputable replica placement: `d` distinct slots in `[0, num_slots)`
/// fully determined by `(user_seed, d, num_slots)`.
///
/// Partial Fisher–Yates over the virtual array `0..num_slots`: step `i`
/// swaps position `i` with `i + below(num_slots - i)` and emits position `i`.
pub fn replica_slots_from_seed(user_seed: u64, d: usize, num_slots: usize) -> Vec<usize> {
    assert!(d <= num_slots, "degree {d} exceeds frame of {num_slots} slots");
    let mut stream = SeedStream::new(user_seed, num_slots as u64);
    let mut swapped: HashMap<usize, usize> = HashMap::with_capacity(2 * d);
    let mut out = Vec::with_capacity(d);
    for i in 0..d {
        let j = i + stream.below((num_slots - i) as u64) as usize;
        let at_i = *swapped.get(&i).unwrap_or(&i);
        let at_j = *swapped.get(&j).unwrap_or(&j);
        swapped.insert(j, at_i);
        out.push(at_j);
    }
    out
}

/// Seed for the slot choice of `user_id` in frame `frame_index` under the
/// beacon-advertised `nonce`.
pub fn prf_seed(user_id: u64, frame_index: u64, nonce: u64) -> u64 {
    derive_seed(&[user_id, frame_index, nonce])
}

/// Binomial(`population`, `p_a`) count of active users.
pub fn draw_active_count<R: Rng + ?Sized>(
    population: usize,
    p_a: f64,
    rng: &mut R,
) -> Result<usize, TrafficError> {
    if !(p_a > 0.0 && p_a <= 1.0) {
        return Err(TrafficError::BadActivation(p_a));
    }
    if p_a == 1.0 {
        return Ok(population);
    }
    let bin = Binomial::new(population as u64, p_a).map_err(|_| TrafficError::BadActivation(p_a))?;
    Ok(bin.sample(rng) as usize)
}

/// Inverse-CDF draw from `dist`.
pub fn sample_degree<R: Rng + ?Sized>(dist: &DegreeDistribution, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (d, p) in dist.iter() {
        acc += p;
        if u < acc {
            return d;
        }
    }
    dist.max_degree()
}

fn check_fits(dist: &DegreeDistribution, num_slots: usize) -> Result<(), TrafficError> {
    let degree = dist.max_degree();
    if degree > num_slots {
        return Err(TrafficError::DegreeExceedsFrame { degree, num_slots });
    }
    Ok(())
}

/// Each of `n_active` users draws its degree from `dist`, then that many
/// distinct slots uniformly without replacement.
pub fn build_graph<R: Rng + ?Sized>(
    n_active: usize,
    num_slots: usize,
    dist: &DegreeDistribution,
    rng: &mut R,
) -> Result<ContentionGraph, TrafficError> {
    check_fits(dist, num_slots)?;
    let placements = (0..n_active)
        .map(|_| {
            let d = sample_degree(dist, rng);
            rand::seq::index::sample(rng, num_slots, d).into_vec()
        })
        .collect();
    Ok(ContentionGraph::new(num_slots, placements).expect("sampled slots are distinct and in range"))
}

/// Like [`build_graph`], but each user draws a 64-bit seed and places its
/// replicas with [`replica_slots_from_seed`].
pub fn build_graph_seeded<R: Rng + ?Sized>(
    n_active: usize,
    num_slots: usize,
    dist: &DegreeDistribution,
    rng: &mut R,
) -> Result<ContentionGraph, TrafficError> {
    check_fits(dist, num_slots)?;
    let placements = (0..n_active)
        .map(|_| {
            let d = sample_degree(dist, rng);
            replica_slots_from_seed(rng.next_u64(), d, num_slots)
        })
        .collect();
    Ok(ContentionGraph::new(num_slots, placements).expect("seeded slots are distinct and in range"))
}
