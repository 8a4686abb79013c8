//! Counter-based random numbers.
//!
//! Draw `i` of stream `s` under seed `k` is `mix(k ^ (s * STREAM) + (i + 1) * GOLDEN)`
//! where `mix` is the SplitMix64 finalizer. The map is stateless, so any draw can be
//! reproduced from `(seed, stream, index)` alone and ported to other languages.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const STREAM: u64 = 0xD1B5_4A32_D192_ED03;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The raw 64-bit draw at `(seed, stream, index)`.
pub fn draw(seed: u64, stream: u64, index: u64) -> u64 {
    mix((seed ^ stream.wrapping_mul(STREAM)).wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Sequential view over one stream.
#[derive(Debug, Clone)]
pub struct CounterRng {
    seed: u64,
    stream: u64,
    index: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream, index: 0 }
    }

    /// Independent stream derived from this one's seed.
    pub fn fork(&self, stream: u64) -> Self {
        Self::new(self.seed, mix(self.stream ^ stream.wrapping_mul(GOLDEN)))
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = draw(self.seed, self.stream, self.index);
        self.index += 1;
        v
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Log-uniform in `[lo, hi)`, both positive.
    pub fn log_range(&mut self, lo: f64, hi: f64) -> f64 {
        (lo.ln() + (hi.ln() - lo.ln()) * self.uniform()).exp()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n.saturating_sub(1))
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
