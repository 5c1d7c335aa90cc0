//! Keyed random streams and the variate generators used by the schemes.
//!
//! Every stream is a ChaCha8 keystream. The 256-bit key is derived from
//! `(seed, substream)` and the 64-bit stream id is the path index, so the
//! draws for path `i` depend only on its [`StreamKey`] and never on how paths
//! are scheduled across workers.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Open01, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Independent randomness consumers for a single path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Substream {
    /// Brownian increments driving the Euler-type schemes.
    Brownian,
    /// Randomness of the exact noncentral chi-squared transition.
    Transition,
}

impl Substream {
    pub fn index(self) -> u64 {
        match self {
            Substream::Brownian => 0,
            Substream::Transition => 1,
        }
    }
}

/// Identifies one reproducible stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub path_index: u64,
    pub substream: Substream,
}

impl StreamKey {
    pub fn new(seed: u64, path_index: u64, substream: Substream) -> Self {
        StreamKey {
            seed,
            path_index,
            substream,
        }
    }

    pub fn brownian(seed: u64, path_index: u64) -> Self {
        StreamKey::new(seed, path_index, Substream::Brownian)
    }

    pub fn transition(seed: u64, path_index: u64) -> Self {
        StreamKey::new(seed, path_index, Substream::Transition)
    }

    pub fn stream(&self) -> Stream {
        Stream::new(*self)
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A single-threaded random stream instantiated from a [`StreamKey`].
#[derive(Debug, Clone)]
pub struct Stream {
    inner: ChaCha8Rng,
}

impl Stream {
    pub fn new(key: StreamKey) -> Self {
        let mut state = key.seed ^ key.substream.index().wrapping_mul(0xd6e8_feb8_6659_fd93);
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut inner = ChaCha8Rng::from_seed(seed);
        inner.set_stream(key.path_index);
        Stream { inner }
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform on the open interval (0, 1).
    #[inline]
    pub fn uniform_open(&mut self) -> f64 {
        self.inner.sample(Open01)
    }

    /// Fills `out` with i.i.d. standard normals.
    pub fn fill_normals(&mut self, out: &mut [f64]) {
        for x in out {
            *x = self.standard_normal();
        }
    }
}

impl RngCore for Stream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// `count` standard normals from the stream identified by `key`.
pub fn normal_draws(key: StreamKey, count: usize) -> Vec<f64> {
    let mut stream = key.stream();
    let mut out = vec![0.0; count];
    stream.fill_normals(&mut out);
    out
}

/// One gamma(shape, scale) variate.
///
/// Marsaglia–Tsang squeeze/rejection for `shape ≥ 1`; smaller shapes are
/// boosted via `G(a) = G(a + 1)·U^{1/a}`.
pub fn gamma_draw(stream: &mut Stream, shape: f64, scale: f64) -> Result<f64> {
    if !(shape.is_finite() && shape > 0.0) {
        return Err(Error::param("shape", shape, "must be finite and positive"));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::param("scale", scale, "must be finite and positive"));
    }
    Ok(scale * standard_gamma(stream, shape))
}

fn standard_gamma(stream: &mut Stream, shape: f64) -> f64 {
    if shape < 1.0 {
        let boosted = marsaglia_tsang(stream, shape + 1.0);
        let u = stream.uniform_open();
        return boosted * (u.ln() / shape).exp();
    }
    marsaglia_tsang(stream, shape)
}

fn marsaglia_tsang(stream: &mut Stream, shape: f64) -> f64 {
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = stream.standard_normal();
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u = stream.uniform_open();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 {
            return d * v;
        }
        if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Means below this use multiplicative inversion; above it PTRS.
pub const POISSON_INVERSION_LIMIT: f64 = 10.0;

/// One Poisson(mean) variate.
///
/// Inversion by sequential products for small means, Hörmann's transformed
/// rejection with squeeze (PTRS) for `mean ≥ POISSON_INVERSION_LIMIT`, which
/// is exact and runs in expected O(1) time.
pub fn poisson_draw(stream: &mut Stream, mean: f64) -> Result<u64> {
    if !(mean.is_finite() && mean >= 0.0) {
        return Err(Error::param(
            "mean",
            mean,
            "must be finite and non-negative",
        ));
    }
    if mean == 0.0 {
        return Ok(0);
    }
    if mean < POISSON_INVERSION_LIMIT {
        return Ok(poisson_inversion(stream, mean));
    }
    Ok(poisson_ptrs(stream, mean))
}

fn poisson_inversion(stream: &mut Stream, mean: f64) -> u64 {
    let threshold = (-mean).exp();
    let mut count = 0;
    let mut prod = stream.uniform_open();
    while prod > threshold {
        count += 1;
        prod *= stream.uniform_open();
    }
    count
}

fn poisson_ptrs(stream: &mut Stream, mean: f64) -> u64 {
    let slam = mean.sqrt();
    let loglam = mean.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = stream.uniform_open() - 0.5;
        let v = stream.uniform_open();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -mean + k * loglam - ln_gamma(k + 1.0);
        if lhs <= rhs {
            return k as u64;
        }
    }
}

/// One noncentral chi-squared variate with `d` degrees of freedom and
/// noncentrality `lambda`, as the Poisson mixture
/// `J ~ Poisson(λ/2)`, `Y ~ Gamma(d/2 + J, 2)`.
pub fn noncentral_chi2_draw(stream: &mut Stream, d: f64, lambda: f64) -> Result<f64> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::param("d", d, "degrees of freedom must be positive"));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::param(
            "lambda",
            lambda,
            "noncentrality must be finite and non-negative",
        ));
    }
    let j = poisson_draw(stream, 0.5 * lambda)?;
    Ok(2.0 * standard_gamma(stream, 0.5 * d + j as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn empty_draws() {
        assert!(normal_draws(StreamKey::brownian(1, 0), 0).is_empty());
    }

    #[test]
    fn same_key_same_sequence() {
        let key = StreamKey::brownian(99, 12345);
        assert_eq!(normal_draws(key, 1000), normal_draws(key, 1000));
    }

    #[test]
    fn distinct_keys_distinct_sequences() {
        let a = normal_draws(StreamKey::brownian(1, 0), 16);
        let b = normal_draws(StreamKey::brownian(1, 1), 16);
        let c = normal_draws(StreamKey::transition(1, 0), 16);
        let d = normal_draws(StreamKey::brownian(2, 0), 16);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn normal_moments() {
        let n = 1_000_000;
        let xs = normal_draws(StreamKey::brownian(7, 3), n);
        let (m, v) = mean_var(&xs);
        assert!(m.abs() < 4.0 / (n as f64).sqrt(), "mean {m}");
        assert!((v - 1.0).abs() < 0.01, "variance {v}");
    }

    #[test]
    fn neighbouring_streams_are_uncorrelated() {
        let n = 200_000;
        let a = normal_draws(StreamKey::brownian(5, 10), n);
        let b = normal_draws(StreamKey::brownian(5, 11), n);
        let corr = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / n as f64;
        assert!(corr.abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn gamma_exponential_mean() {
        let mut s = StreamKey::transition(11, 0).stream();
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| gamma_draw(&mut s, 1.0, 1.0).unwrap())
            .collect();
        let (m, v) = mean_var(&xs);
        let se = (v / xs.len() as f64).sqrt();
        assert!((m - 1.0).abs() < 3.0 * se, "mean {m} se {se}");
        assert!(xs.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn gamma_shape_four_scale_two() {
        let mut s = StreamKey::transition(12, 0).stream();
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| gamma_draw(&mut s, 4.0, 2.0).unwrap())
            .collect();
        let (m, v) = mean_var(&xs);
        let se = (v / xs.len() as f64).sqrt();
        assert!((m - 8.0).abs() < 3.0 * se, "mean {m} se {se}");
    }

    #[test]
    fn gamma_small_shape_moments() {
        let mut s = StreamKey::transition(13, 0).stream();
        let shape = 0.125;
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| gamma_draw(&mut s, shape, 1.0).unwrap())
            .collect();
        let (m, v) = mean_var(&xs);
        let se = (v / xs.len() as f64).sqrt();
        assert!((m - shape).abs() < 3.0 * se, "mean {m} se {se}");
        assert!(xs.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn gamma_rejects_bad_arguments() {
        let mut s = StreamKey::transition(0, 0).stream();
        assert!(gamma_draw(&mut s, 0.0, 1.0).is_err());
        assert!(gamma_draw(&mut s, 1.0, 0.0).is_err());
        assert!(gamma_draw(&mut s, -1.0, 1.0).is_err());
    }

    #[test]
    fn poisson_zero_mean() {
        let mut s = StreamKey::transition(0, 0).stream();
        assert!((0..1000).all(|_| poisson_draw(&mut s, 0.0).unwrap() == 0));
        assert!(poisson_draw(&mut s, -1.0).is_err());
    }

    #[test]
    fn poisson_small_mean_moments() {
        let mut s = StreamKey::transition(21, 0).stream();
        let mean = 3.7;
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| poisson_draw(&mut s, mean).unwrap() as f64)
            .collect();
        let (m, v) = mean_var(&xs);
        let n = xs.len() as f64;
        let se_mean = (mean / n).sqrt();
        // Var of the sample variance for Poisson: (μ4 − σ⁴)/n with μ4 = λ(1+3λ)
        let se_var = ((mean * (1.0 + 3.0 * mean) - mean * mean) / n).sqrt();
        assert!((m - mean).abs() < 3.0 * se_mean, "mean {m}");
        assert!((v - mean).abs() < 3.0 * se_var, "variance {v}");
    }

    #[test]
    fn poisson_large_mean() {
        let mut s = StreamKey::transition(22, 0).stream();
        let mean = 1e4;
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| poisson_draw(&mut s, mean).unwrap() as f64)
            .collect();
        let (m, v) = mean_var(&xs);
        let se = (mean / n as f64).sqrt();
        assert!((m - mean).abs() < 3.0 * se, "mean {m}");
        assert!((v / mean - 1.0).abs() < 0.03, "variance {v}");
    }

    #[test]
    fn poisson_at_threshold_matches_pmf() {
        // both branches near the switch agree with the exact pmf
        for mean in [9.99f64, 10.0, 10.5] {
            let mut s = StreamKey::transition(23, mean.to_bits()).stream();
            let n = 200_000;
            let mut counts = vec![0u64; 60];
            for _ in 0..n {
                let j = poisson_draw(&mut s, mean).unwrap() as usize;
                counts[j.min(59)] += 1;
            }
            for (j, &c) in counts.iter().enumerate().take(25) {
                let p = (-mean + j as f64 * f64::ln(mean) - ln_gamma(j as f64 + 1.0)).exp();
                let expected = p * n as f64;
                let sd = (expected * (1.0 - p)).sqrt().max(1.0);
                assert!(
                    (c as f64 - expected).abs() < 5.0 * sd,
                    "mean {mean} j {j}: {c} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn central_chi2_when_lambda_zero() {
        let mut s = StreamKey::transition(31, 0).stream();
        let d = 3.0;
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| noncentral_chi2_draw(&mut s, d, 0.0).unwrap())
            .collect();
        let (m, v) = mean_var(&xs);
        let se = (v / xs.len() as f64).sqrt();
        assert!((m - d).abs() < 3.0 * se);
    }

    #[test]
    fn noncentral_chi2_moments() {
        let mut s = StreamKey::transition(32, 0).stream();
        let (d, lambda) = (8.0, 5.0);
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| noncentral_chi2_draw(&mut s, d, lambda).unwrap())
            .collect();
        let (m, v) = mean_var(&xs);
        let n = xs.len() as f64;
        let se_mean = (v / n).sqrt();
        let fourth = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
        let se_var = ((fourth - v * v) / n).sqrt();
        assert!((m - 13.0).abs() < 3.0 * se_mean, "mean {m}");
        assert!((v - 36.0).abs() < 3.0 * se_var, "variance {v} se {se_var}");
    }

    #[test]
    fn noncentral_chi2_rejects_bad_arguments() {
        let mut s = StreamKey::transition(0, 0).stream();
        assert!(noncentral_chi2_draw(&mut s, 0.0, 1.0).is_err());
        assert!(noncentral_chi2_draw(&mut s, 1.0, -1.0).is_err());
    }
}
