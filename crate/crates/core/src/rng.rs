//! Named, splittable random streams.
//!
//! Every stochastic routine takes an explicit `&mut StdRng`-like generator. A
//! [`SeedStream`] derives independent child generators from a master seed and a
//! path of labels, so each phase of a run draws from its own reproducible stream
//! regardless of how much randomness other phases consume.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type IglRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedStream {
    state: u64,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        SeedStream {
            state: splitmix64(seed ^ 0x6a09_e667_f3bc_c908),
        }
    }

    /// Child stream identified by a label.
    pub fn child(&self, label: &str) -> SeedStream {
        let mut h = self.state;
        for b in label.bytes() {
            h = splitmix64(h ^ u64::from(b));
        }
        SeedStream {
            state: splitmix64(h ^ 0xbb67_ae85_84ca_a73b),
        }
    }

    /// Child stream identified by an index, e.g. one per target state.
    pub fn child_index(&self, index: u64) -> SeedStream {
        SeedStream {
            state: splitmix64(splitmix64(self.state ^ 0x3c6e_f372_fe94_f82b).wrapping_add(index)),
        }
    }

    pub fn rng(&self) -> IglRng {
        IglRng::seed_from_u64(self.state)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Draws an index from a probability vector by inversion.
///
/// Falls back to the last index with positive mass when rounding leaves the
/// uniform draw above the cumulative total.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}
