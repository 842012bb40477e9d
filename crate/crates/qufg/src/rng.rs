//! Counter-based deterministic random number generation.
//!
//! Every random draw in this crate is a pure function of `(seed, purpose,
//! indices)`. There is no mutable generator state, so noise injection,
//! dropout and parameter initialisation consume independent streams and a
//! fixed seed reproduces a run bit-for-bit regardless of evaluation order.
//!
//! The construction is three rounds of the splitmix64 finaliser over the
//! key and the absorbed indices. This mapping is part of the crate's
//! stability contract: changing it would silently change every seeded
//! experiment, so it is fixed.

/// splitmix64 finalising permutation.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over the purpose label, used to key independent streams.
fn hash_label(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// A keyed random stream. Draws are indexed, not sequential.
#[derive(Debug, Clone, Copy)]
pub struct Stream {
    key: u64,
}

impl Stream {
    pub fn new(seed: u64, purpose: &str) -> Self {
        Stream {
            key: mix(mix(seed) ^ hash_label(purpose)),
        }
    }

    /// Raw 64-bit word at the given index tuple.
    pub fn word(&self, indices: &[u64]) -> u64 {
        let mut state = self.key;
        for &ix in indices {
            state = mix(state ^ ix);
        }
        mix(state)
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&self, indices: &[u64]) -> f64 {
        (self.word(indices) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform_in(&self, lo: f64, hi: f64, indices: &[u64]) -> f64 {
        lo + (hi - lo) * self.uniform(indices)
    }

    /// Standard normal draw via Box-Muller on two decorrelated uniforms.
    pub fn normal(&self, indices: &[u64]) -> f64 {
        let mut ix: Vec<u64> = indices.to_vec();
        ix.push(0);
        let w1 = self.word(&ix);
        *ix.last_mut().unwrap() = 1;
        let w2 = self.word(&ix);
        // u1 in (0, 1] so the log is finite.
        let u1 = ((w1 >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = (w2 >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}
