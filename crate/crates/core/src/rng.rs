//! Counter-based random streams.
//!
//! Every random value in the crate is a pure function of a 64-bit key and a
//! counter. Keys are derived hierarchically from the user seed
//! (`seed -> replica -> tree -> side -> block`), so the value drawn for a
//! given block never depends on the order in which blocks are materialized or
//! on how replicas are scheduled across threads.

use rand_core::{impls, RngCore};

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer; a bijection on `u64` with full avalanche.
#[inline(always)]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Key of a random stream. Children are derived by hashing a tag into the key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        StreamKey(mix64(seed ^ 0x6c61_6464_6572_7761)) // "ladderwa"
    }

    pub fn raw(self) -> u64 {
        self.0
    }

    pub fn child(self, tag: u64) -> Self {
        StreamKey(mix64(self.0 ^ mix64(tag.wrapping_mul(GOLDEN_GAMMA).wrapping_add(GOLDEN_GAMMA))))
    }

    /// The `counter`-th word of this stream.
    #[inline(always)]
    pub fn word(self, counter: u64) -> u64 {
        mix64(self.0 ^ mix64(counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    pub fn stream(self) -> CounterRng {
        CounterRng { key: self, counter: 0 }
    }
}

/// Sequential view of a keyed stream: word `i` is `key.word(i)`.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: StreamKey,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        StreamKey::new(seed).stream()
    }

    pub fn key(&self) -> StreamKey {
        self.key
    }

    pub fn position(&self) -> u64 {
        self.counter
    }
}

impl RngCore for CounterRng {
    #[inline(always)]
    fn next_u64(&mut self) -> u64 {
        let w = self.key.word(self.counter);
        self.counter = self.counter.wrapping_add(1);
        w
    }

    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        impls::fill_bytes_via_next(self, dst)
    }
}

/// Uniform on (0, 1]; never returns zero.
#[inline]
pub fn open_unit(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform on `{0, .., n-1}` by multiply-shift. The bias is below `n / 2^64`.
#[inline]
pub fn below(rng: &mut impl RngCore, n: u64) -> u64 {
    debug_assert!(n > 0);
    ((rng.next_u64() as u128 * n as u128) >> 64) as u64
}

/// Geometric law on `{0, 1, ..}` with `P[k] = (1 - q) q^k`, by inversion.
pub fn geometric(rng: &mut impl RngCore, q: f64) -> u32 {
    debug_assert!(q > 0.0 && q < 1.0);
    let u = open_unit(rng);
    let k = (u.ln() / q.ln()).floor();
    if k >= u32::MAX as f64 {
        u32::MAX
    } else {
        k as u32
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_is_reproducible_and_positional() {
        let key = StreamKey::new(7).child(3);
        let mut a = key.stream();
        let seq: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        for (i, w) in seq.iter().enumerate() {
            assert_eq!(*w, key.word(i as u64));
        }
        let mut b = key.stream();
        assert_eq!(b.next_u64(), seq[0]);
    }

    #[test]
    fn children_differ() {
        let k = StreamKey::new(1);
        assert_ne!(k.child(0), k.child(1));
        assert_ne!(k.child(0).word(0), k.child(1).word(0));
        assert_ne!(StreamKey::new(1), StreamKey::new(2));
    }

    #[test]
    fn open_unit_in_range() {
        let mut r = CounterRng::new(5);
        for _ in 0..10_000 {
            let u = open_unit(&mut r);
            assert!(u > 0.0 && u <= 1.0);
        }
    }

    #[test]
    fn uniform_words_have_right_mean() {
        let mut r = CounterRng::new(11);
        let n = 200_000;
        let mean = (0..n).map(|_| open_unit(&mut r)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.005, "{mean}");
    }

    #[test]
    fn below_covers_range() {
        let mut r = CounterRng::new(3);
        let mut seen = [0usize; 5];
        for _ in 0..5_000 {
            seen[below(&mut r, 5) as usize] += 1;
        }
        assert!(seen.iter().all(|&c| c > 850 && c < 1150), "{seen:?}");
    }
}
