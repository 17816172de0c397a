//! Counter-based random streams.
//!
//! A [`Stream`] is a pair of 64-bit keys plus a counter. Output `i` is
//! `mix64(mix64(k0 ^ i) + k1)` where `mix64` is the SplitMix64 finalizer
//! (constants `0xBF58476D1CE4E5B9`, `0x94D049BB133111EB`, shifts 30/27/31).
//! Child streams are derived from a parent's keys and a 64-bit label without
//! consuming any parent output, so a trial's stream depends only on the path
//! of labels that names it (for example `master -> "embed" -> graph -> trial`).
//!
//! The construction only uses wrapping 64-bit integer arithmetic, so every
//! implementation that follows the constants above produces the same bits.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const SEED_SALT: u64 = 0xD1B5_4A32_D192_ED03;
const KEY1_SALT: u64 = 0x8CB9_2BA7_2F3D_8DD7;

/// SplitMix64 output finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over bytes; used to turn stream labels like `"graph"` into integers.
pub fn label(name: &str) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in name.as_bytes() {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stream {
    k0: u64,
    k1: u64,
    counter: u64,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        let k0 = mix64(seed ^ SEED_SALT);
        let k1 = mix64(k0 ^ KEY1_SALT);
        Self { k0, k1, counter: 0 }
    }

    /// Child stream for `label`. Does not advance `self`.
    pub fn derive(&self, label: u64) -> Self {
        let k0 = mix64(self.k0 ^ mix64(label.wrapping_mul(GOLDEN) ^ self.k1));
        let k1 = mix64(k0 ^ self.k1.rotate_left(29) ^ KEY1_SALT);
        Self { k0, k1, counter: 0 }
    }

    /// Child stream for a textual label.
    pub fn derive_named(&self, name: &str) -> Self {
        self.derive(label(name))
    }

    /// Derives a plain 64-bit seed (for APIs that take `u64` seeds).
    pub fn seed_for(&self, label: u64) -> u64 {
        let child = self.derive(label);
        child.k0 ^ child.k1
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let x = mix64(self.k0 ^ self.counter).wrapping_add(self.k1);
        self.counter = self.counter.wrapping_add(1);
        mix64(x)
    }

    /// Uniform integer in `[0, bound)` by Lemire's multiply-shift with
    /// rejection. `bound` must be nonzero.
    #[inline]
    pub fn below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        let mut m = u128::from(self.next_u64()) * u128::from(bound);
        if (m as u64) < bound {
            let threshold = bound.wrapping_neg() % bound;
            while (m as u64) < threshold {
                m = u128::from(self.next_u64()) * u128::from(bound);
            }
        }
        (m >> 64) as u64
    }

    /// Uniform `f64` in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// In-place Fisher-Yates shuffle (descending index, `below(i + 1)`).
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible() {
        let mut a = Stream::new(42).derive(7).derive_named("x");
        let mut b = Stream::new(42).derive(7).derive_named("x");
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn derivation_order_matters() {
        let root = Stream::new(1);
        let mut ab = root.derive(2).derive(3);
        let mut ba = root.derive(3).derive(2);
        assert_ne!(ab.next_u64(), ba.next_u64());
    }

    #[test]
    fn derive_does_not_advance_parent() {
        let mut root = Stream::new(9);
        let _ = root.derive(1);
        let mut fresh = Stream::new(9);
        assert_eq!(root.next_u64(), fresh.next_u64());
    }

    // Frozen output: any change here breaks seed portability.
    #[test]
    fn known_answer() {
        assert_eq!(mix64(0), 0);
        assert_eq!(mix64(1), 0x5692_161d_100b_05e5);
        let mut s = Stream::new(0);
        let first = s.next_u64();
        let mut again = Stream::new(0);
        assert_eq!(first, again.next_u64());
    }

    #[test]
    fn below_is_in_range_and_roughly_uniform() {
        let mut s = Stream::new(3);
        let mut counts = [0u32; 3];
        for _ in 0..30_000 {
            counts[s.below(3) as usize] += 1;
        }
        for c in counts {
            assert!((9_000..11_000).contains(&c), "{counts:?}");
        }
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut s = Stream::new(5);
        let mut v: Vec<u32> = (0..100).collect();
        s.shuffle(&mut v);
        let mut sorted = v.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..100).collect::<Vec<_>>());
        assert_ne!(v, sorted);
    }
}
