//! Seeded sampling without replacement.
//!
//! The generator is SplitMix64 and bounded draws use rejection sampling on
//! the low residue, so a sample is fully determined by the population order
//! and the seed:
//!
//! ```text
//! next():   state += 0x9E3779B97F4A7C15
//!           z = state
//!           z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//!           z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//!           return z ^ (z >> 31)
//! below(b): t = (2^64 - b) mod b; draw r = next() until r >= t; return r mod b
//! sample:   idx = [0, 1, ..., N-1]
//!           for i in 0..n: j = i + below(N - i); swap(idx[i], idx[j])
//!           return population[idx[0]], ..., population[idx[n-1]]
//! ```

/// SplitMix64 pseudo-random generator (all arithmetic wrapping).
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform integer in `0..bound`. `bound` must be positive.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let r = self.next_u64();
            if r >= threshold {
                return r % bound;
            }
        }
    }

    /// Uniform float in `[0, 1)` from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Indices of a uniform sample of `n` out of `population` items, in draw order.
pub fn sample_indices(population: usize, n: usize, seed: u64) -> Vec<usize> {
    assert!(n <= population);
    let mut idx: Vec<usize> = (0..population).collect();
    let mut rng = SplitMix64::new(seed);
    for i in 0..n {
        let j = i + rng.below((population - i) as u64) as usize;
        idx.swap(i, j);
    }
    idx.truncate(n);
    idx
}
