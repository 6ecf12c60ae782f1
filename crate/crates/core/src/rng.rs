//! Portable counter-based random numbers.
//!
//! The generator is SplitMix64 viewed as a counter-based function: the
//! `n`-th output of a stream with key `k` is `mix64(k + (n + 1) * GAMMA)`,
//! where `mix64` is the Stafford variant-13 finalizer. Only wrapping
//! 64-bit integer arithmetic is involved, so any language with `u64`
//! reproduces the exact same sequence.
//!
//! Sub-streams (one per image, per split, per shard...) are keyed by
//! `mix64(seed ^ mix64(index + 1))`, which keeps them decorrelated for
//! adjacent indices.

use crate::gmm::special::gaussian_quantile_unchecked;

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Stafford variant-13 64-bit finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { key: seed, counter: 0 }
    }

    /// Independent stream `index` derived from `seed`.
    pub fn stream(seed: u64, index: u64) -> Self {
        Self::new(mix64(seed ^ mix64(index.wrapping_add(1))))
    }

    /// Child stream derived from this stream's key, leaving `self` untouched.
    pub fn fork(&self, index: u64) -> Self {
        Self::stream(self.key, index)
    }

    /// Output at an absolute position without advancing the stream.
    #[inline]
    pub fn at(&self, position: u64) -> u64 {
        mix64(self.key.wrapping_add(position.wrapping_add(1).wrapping_mul(GAMMA)))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let out = self.at(self.counter);
        self.counter = self.counter.wrapping_add(1);
        out
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on the open interval `(0, 1)`.
    #[inline]
    pub fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Integer uniform on `lo..=hi` (Lemire's multiply-shift reduction).
    pub fn range_inclusive(&mut self, lo: i64, hi: i64) -> i64 {
        debug_assert!(lo <= hi);
        let span = (hi - lo) as u64 + 1;
        let wide = (self.next_u64() as u128) * (span as u128);
        lo + (wide >> 64) as i64
    }

    /// Standard normal draw by inversion of the Gaussian CDF.
    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        gaussian_quantile_unchecked(self.next_open01())
    }

    #[inline]
    pub fn normal(&mut self, mean: f64, std: f64) -> f64 {
        mean + std * self.standard_normal()
    }

    /// Poisson draw by sequential inversion; exact for the means used by
    /// shot noise (at most a few hundred).
    pub fn poisson(&mut self, mean: f64) -> u64 {
        if mean <= 0.0 {
            return 0;
        }
        if mean > 500.0 {
            // Normal approximation keeps the loop bounded for huge means.
            return self.normal(mean, mean.sqrt()).round().max(0.0) as u64;
        }
        let u = self.next_f64();
        let mut k = 0u64;
        let mut p = (-mean).exp();
        if p == 0.0 {
            // exp underflow: start the walk from the log domain.
            let mut log_p = -mean;
            let mut cdf = 0.0;
            loop {
                let pk = log_p.exp();
                cdf += pk;
                if u < cdf || k > 10_000 {
                    return k;
                }
                k += 1;
                log_p += mean.ln() - (k as f64).ln();
            }
        }
        let mut cdf = p;
        while u >= cdf && k < 10_000 {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
        }
        k
    }
}
