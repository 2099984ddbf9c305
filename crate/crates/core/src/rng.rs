//! Reproducible random ensembles.
//!
//! All random test data is drawn from SplitMix64 (Steele, Lea & Flood 2014):
//!
//! ```text
//! state  = state + 0x9E3779B97F4A7C15            (wrapping)
//! z      = state
//! z      = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9  (wrapping)
//! z      = (z ^ (z >> 27)) * 0x94D049BB133111EB  (wrapping)
//! output = z ^ (z >> 31)
//! ```
//!
//! Uniform doubles are `(output >> 11) * 2^-53` in `[0, 1)`. Standard normals use
//! Box–Muller on two consecutive uniforms `u1, u2`:
//! `sqrt(-2 ln(1 - u1)) * cos(2π u2)`; the sine branch is discarded so each normal
//! consumes exactly two outputs. A complex Gaussian draws the real part first,
//! then the imaginary part, each N(0, 1).
//!
//! Independent streams for named sub-experiments are obtained with
//! [`Ensemble::substream`], which seeds a fresh generator from
//! `seed ^ (stream * 0x9E3779B97F4A7C15)`.

use num_complex::Complex64;
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use std::f64::consts::TAU;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone)]
pub struct Ensemble {
    inner: SplitMix64,
}

impl Ensemble {
    pub fn new(seed: u64) -> Self {
        Ensemble {
            inner: SplitMix64::seed_from_u64(seed),
        }
    }

    pub fn substream(seed: u64, stream: u64) -> Self {
        Self::new(seed ^ stream.wrapping_mul(GOLDEN))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n` (n > 0), by floor of a uniform double.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (TAU * u2).cos()
    }

    pub fn complex_normal(&mut self) -> Complex64 {
        let re = self.normal();
        let im = self.normal();
        Complex64::new(re, im)
    }

    pub fn complex_normals(&mut self, n: usize) -> Vec<Complex64> {
        (0..n).map(|_| self.complex_normal()).collect()
    }
}
