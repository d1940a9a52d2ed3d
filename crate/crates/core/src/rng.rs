//! Seedable, splittable random streams.
//!
//! Every stream is a ChaCha8 keystream keyed by the 64-bit seed and addressed
//! by a 64-bit stream id, so `(seed, stream_id)` pins the whole draw sequence
//! on every platform. Normal draws use the ziggurat sampler of `rand_distr`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct RngStream {
    rng: ChaCha8Rng,
    seed: u64,
    stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            rng,
            seed,
            stream_id,
        }
    }

    /// A fresh stream on the same seed with a different id.
    pub fn child(&self, stream_id: u64) -> Self {
        Self::with_stream(self.seed, stream_id)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.random::<u64>()
    }
}

pub fn sample_normal(rng: &mut RngStream, mu: f64, sigma: f64) -> Result<f64> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::domain("sample_normal", format!("sigma = {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(mu);
    }
    Ok(mu + sigma * rng.standard_normal())
}

pub fn sample_bernoulli(rng: &mut RngStream, p: f64) -> Result<bool> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain("sample_bernoulli", format!("p = {p}")));
    }
    Ok(rng.uniform() < p)
}

/// Uniform integer in `0..n`.
pub fn sample_uniform_int(rng: &mut RngStream, n: i64) -> Result<usize> {
    if n < 1 {
        return Err(Error::domain("sample_uniform_int", format!("n = {n}")));
    }
    Ok(rng.rng.random_range(0..n as usize))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_normal() {
        let mut rng = RngStream::new(3);
        assert_eq!(sample_normal(&mut rng, 5.0, 0.0).unwrap(), 5.0);
        assert!(sample_normal(&mut rng, 0.0, -1.0).is_err());
    }

    #[test]
    fn same_seed_same_draws() {
        let mut a = RngStream::with_stream(42, 7);
        let mut b = RngStream::with_stream(42, 7);
        for _ in 0..100 {
            assert_eq!(
                sample_normal(&mut a, 0.0, 1.0).unwrap().to_bits(),
                sample_normal(&mut b, 0.0, 1.0).unwrap().to_bits()
            );
            assert_eq!(
                sample_uniform_int(&mut a, 9).unwrap(),
                sample_uniform_int(&mut b, 9).unwrap()
            );
        }
    }

    #[test]
    fn streams_differ() {
        let mut a = RngStream::with_stream(42, 0);
        let mut b = RngStream::with_stream(42, 1);
        let da: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let db: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_ne!(da, db);
        let mut c = a.child(1);
        let mut b2 = RngStream::with_stream(42, 1);
        assert_eq!(c.next_u64(), b2.next_u64());
    }

    #[test]
    fn pinned_first_draws() {
        // frozen from the first run; guards the algorithm choice
        let mut rng = RngStream::with_stream(1, 0);
        assert_eq!(rng.next_u64(), 7424550030962593201);
        assert_eq!(rng.uniform(), 0.08038370892978197);
    }

    #[test]
    fn bernoulli_extremes() {
        let mut rng = RngStream::new(1);
        for _ in 0..1000 {
            assert!(sample_bernoulli(&mut rng, 1.0).unwrap());
            assert!(!sample_bernoulli(&mut rng, 0.0).unwrap());
        }
        assert!(sample_bernoulli(&mut rng, 1.5).is_err());
        assert!(sample_bernoulli(&mut rng, -0.1).is_err());
    }

    #[test]
    fn uniform_int_bounds() {
        let mut rng = RngStream::new(1);
        assert_eq!(sample_uniform_int(&mut rng, 1).unwrap(), 0);
        assert!(sample_uniform_int(&mut rng, 0).is_err());
        assert!(sample_uniform_int(&mut rng, -3).is_err());
    }

    #[test]
    fn normal_mean_clt() {
        let mut rng = RngStream::new(2024);
        let n = 1_000_000;
        let mean = (0..n)
            .map(|_| sample_normal(&mut rng, 0.0, 1.0).unwrap())
            .sum::<f64>()
            / n as f64;
        // 3 standard errors of a unit-variance mean
        assert!(mean.abs() < 3.0 / (n as f64).sqrt() + 1e-12, "mean {mean}");
    }

    #[test]
    fn bernoulli_frequency_clt() {
        let mut rng = RngStream::new(77);
        let n = 1_000_000;
        let hits = (0..n)
            .filter(|_| sample_bernoulli(&mut rng, 0.5).unwrap())
            .count();
        let freq = hits as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.0015, "freq {freq}");
    }

    #[test]
    fn uniform_int_frequency_clt() {
        let mut rng = RngStream::new(5);
        let n = 1_000_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[sample_uniform_int(&mut rng, 4).unwrap()] += 1;
        }
        for c in counts {
            let f = c as f64 / n as f64;
            assert!((f - 0.25).abs() < 0.0013, "freq {f}");
        }
    }
}
