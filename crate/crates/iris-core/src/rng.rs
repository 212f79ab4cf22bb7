//! Deterministic random number generation.
//!
//! All stochastic steps in the pipeline (impostor sampling, weight init,
//! mining, synthetic data) draw from SplitMix64 streams keyed by explicit
//! (seed, domain, counter) tuples. Streams are splittable: a stream keyed by
//! the same tuple always produces the same values, independent of what any
//! other stream consumed, so parallel generation never changes results and
//! outputs are stable across releases.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a sequence of 64-bit words into a single stream key.
pub fn mix_key(words: &[u64]) -> u64 {
    let mut state: u64 = 0x6A09_E667_F3BC_C909; // sqrt(2) fraction, fixed starting point
    for &w in words {
        let mut s = state ^ w;
        state = splitmix64(&mut s) ^ w.rotate_left(23);
    }
    let mut s = state;
    splitmix64(&mut s)
}

/// Mix a string (e.g. a class id) into a 64-bit word via FNV-1a.
pub fn hash_str(s: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Sequential deterministic stream of pseudo-random values.
#[derive(Debug, Clone)]
pub struct Stream {
    state: u64,
}

impl Stream {
    pub fn new(key: u64) -> Self {
        Stream { state: key }
    }

    /// Stream keyed by (seed, domain tag, counters...).
    pub fn keyed(seed: u64, domain: u64, counters: &[u64]) -> Self {
        let mut words = Vec::with_capacity(2 + counters.len());
        words.push(seed);
        words.push(domain);
        words.extend_from_slice(counters);
        Stream::new(mix_key(&words))
    }

    pub fn next_u64(&mut self) -> u64 {
        splitmix64(&mut self.state)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, n). Unbiased via rejection.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    /// Uniform in [lo, hi].
    pub fn range_f64(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Signed integer uniform in [lo, hi] inclusive.
    pub fn range_i64(&mut self, lo: i64, hi: i64) -> i64 {
        debug_assert!(lo <= hi);
        lo + self.below((hi - lo + 1) as usize) as i64
    }

    /// Standard normal via Box-Muller (one value per call; the pair's second
    /// member is discarded to keep the draw count predictable).
    pub fn next_gaussian(&mut self) -> f64 {
        let u1 = loop {
            let u = self.next_f64();
            if u > 0.0 {
                break u;
            }
        };
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Draw k distinct indices from [0, n) by partial Fisher-Yates.
    /// Returned order is the shuffle order (not sorted).
    pub fn sample_distinct(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n);
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below(n - i);
            idx.swap(i, j);
        }
        idx.truncate(k);
        idx
    }
}

/// Domain tags keeping unrelated streams statistically independent.
pub mod domain {
    pub const IMPOSTOR_PAIRS: u64 = 0x494D_5053; // "IMPS"
    pub const KERNEL_INIT: u64 = 0x4B49_4E49; // "KINI"
    pub const MINING: u64 = 0x4D49_4E45; // "MINE"
    pub const VALIDATION: u64 = 0x5641_4C53; // "VALS"
    pub const SYNTH_CLASS: u64 = 0x5359_4E43; // "SYNC"
    pub const SYNTH_IMAGE: u64 = 0x5359_4E49; // "SYNI"
}
