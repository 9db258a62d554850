//! Pinned pseudo-random stream: xoshiro256** seeded by expanding a 64-bit
//! seed with splitmix64.
//!
//! Every random decision in the crate goes through [`Stream::uniform`] and
//! [`Stream::categorical`], so a trace can be reproduced bit for bit by any
//! implementation of the same three pieces:
//!
//! * state words `s[0..4]` are four successive splitmix64 outputs from the
//!   seed;
//! * a uniform is `(next_u64() >> 11) * 2^-53`, in `[0, 1)`;
//! * a categorical draw takes one uniform `u`, sets `target = u * Σw`, and
//!   returns the first index whose running sum exceeds `target` (falling
//!   back to the last positive weight).

/// One splitmix64 step: advances `state` and returns the mixed output.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of chain `index` among several chains started from `seed`.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    let mut s = seed ^ index;
    splitmix64(&mut s)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stream {
    s: [u64; 4],
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let s = [
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
        ];
        Self { s }
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.s;
        let result = s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Inverse-CDF draw over nonnegative `weights` summing to `total`.
    /// Consumes exactly one uniform.
    pub fn categorical(&mut self, weights: &[f64], total: f64) -> usize {
        pick(weights, total, self.uniform())
    }
}

/// The inverse-CDF rule used by [`Stream::categorical`], for a given uniform.
pub fn pick(weights: &[f64], total: f64, u: f64) -> usize {
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if target < acc {
                return i;
            }
        }
    }
    last_positive
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // First outputs of splitmix64 seeded with 0 (reference C code).
        let mut s = 0u64;
        assert_eq!(splitmix64(&mut s), 0xe220_a839_7b1d_cdaf);
        assert_eq!(splitmix64(&mut s), 0x6e78_9e6a_a1b9_65f4);
        assert_eq!(splitmix64(&mut s), 0x06c4_5d18_8009_454f);
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut r = Stream::new(3);
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn pick_rule() {
        let w = [0.0, 0.25, 0.0, 0.75];
        assert_eq!(pick(&w, 1.0, 0.0), 1);
        assert_eq!(pick(&w, 1.0, 0.2499), 1);
        assert_eq!(pick(&w, 1.0, 0.25), 3);
        assert_eq!(pick(&w, 1.0, 0.999_999), 3);
        // Rounding past the end lands on the last positive weight.
        assert_eq!(pick(&[0.5, 0.5, 0.0], 1.0 + 1e-15, 0.999_999_999_999_999_9), 1);
    }

    #[test]
    fn child_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..64).map(|i| child_seed(42, i)).collect();
        assert_eq!(seeds.len(), 64);
    }
}
