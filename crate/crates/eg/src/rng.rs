//! Small deterministic PRNG for reproducible sampling.
//!
//! splitmix64: output is a pure function of the seed and call count, so
//! samples drawn with the same seed are identical across platforms and
//! releases, which crate RNGs do not guarantee.

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform value in `[0, bound)` via rejection sampling (no modulo bias).
    pub fn next_below(&mut self, bound: usize) -> usize {
        assert!(bound > 0, "bound must be positive");
        let bound = bound as u64;
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % bound) as usize;
            }
        }
    }
}

/// Uniform sample of `k` items without replacement (partial Fisher-Yates),
/// returned in ascending index order.
pub fn sample_indices(n: usize, k: usize, seed: u64) -> Vec<usize> {
    if k >= n {
        return (0..n).collect();
    }
    let mut rng = SplitMix64::new(seed);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + rng.next_below(n - i);
        pool.swap(i, j);
    }
    let mut chosen = pool[..k].to_vec();
    chosen.sort_unstable();
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_sample() {
        assert_eq!(sample_indices(100, 10, 7), sample_indices(100, 10, 7));
        assert_ne!(sample_indices(100, 10, 7), sample_indices(100, 10, 8));
    }

    #[test]
    fn sample_is_clamped_and_sorted() {
        assert_eq!(sample_indices(5, 10, 1), vec![0, 1, 2, 3, 4]);
        let s = sample_indices(1000, 50, 3);
        assert_eq!(s.len(), 50);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn roughly_uniform_over_seeds() {
        let mut counts = [0usize; 4];
        for seed in 0..4000u64 {
            let s = sample_indices(4, 1, seed);
            counts[s[0]] += 1;
        }
        for c in counts {
            assert!((800..1200).contains(&c), "counts skewed: {counts:?}");
        }
    }
}
