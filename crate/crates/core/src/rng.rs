//! Seeded random streams.
//!
//! Every stream is a ChaCha8 keystream. The key comes from a 64-bit seed mixed
//! with a domain label and the 64-bit stream word selects the substream, so
//! `(seed, label, index)` names a reproducible sequence no matter which worker
//! consumes it.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct RngStream(ChaCha8Rng);

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Substream `index` of the family named by `(seed, label)`.
    pub fn substream(seed: u64, label: &str, index: u64) -> Self {
        let key = splitmix64(seed ^ fnv1a64(label.as_bytes()));
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream(index);
        Self(rng)
    }

    /// Uniform draw on the open interval (0, 1), 53 bits of resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.0.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for RngStream {
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

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
