//! Plain Monte Carlo baseline with a seeded, chunk-parallel sampler.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::gaussmodel::GaussianSpec;
use crate::numcore::Rng;

/// Samples per chunk. Chunk boundaries and chunk seeds depend only on `n`
/// and the seed, never on the thread count.
pub const CHUNK: usize = 1 << 16;

/// Sample mean and its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: u64,
    /// Sample standard deviation of the payoff (`n − 1` normalisation).
    pub payoff_std: f64,
}

/// One-pass mean and variance accumulator.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    /// Welford update.
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Pairwise combination of two disjoint sample sets.
    pub fn merge(&self, other: &RunningStats) -> RunningStats {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let (na, nb, nt) = (self.n as f64, other.n as f64, n as f64);
        let delta = other.mean - self.mean;
        RunningStats {
            n,
            mean: self.mean + delta * nb / nt,
            m2: self.m2 + other.m2 + delta * delta * na * nb / nt,
        }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero below two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn to_estimate(&self) -> McEstimate {
        let sd = self.variance().sqrt();
        McEstimate {
            mean: self.mean,
            std_error: sd / (self.n as f64).sqrt(),
            n_samples: self.n,
            payoff_std: sd,
        }
    }
}

/// Mean of `payoff(x)` for `x ~ dist` over `n` draws.
///
/// Deterministic in `(seed, n)` regardless of the thread count.
pub fn estimate<F>(payoff: F, dist: &GaussianSpec, n: u64, seed: u64) -> Result<McEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    Ok(chunk_stats(&payoff, dist, n, seed, CHUNK)?
        .iter()
        .fold(RunningStats::new(), |acc, s| acc.merge(s))
        .to_estimate())
}

/// Per-chunk statistics in chunk order. Chunk `c` draws from
/// `Rng::new(seed).split(c)`.
pub fn chunk_stats<F>(
    payoff: &F,
    dist: &GaussianSpec,
    n: u64,
    seed: u64,
    chunk: usize,
) -> Result<Vec<RunningStats>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if n < 2 {
        return invalid(format!("need at least 2 samples, got {n}"));
    }
    if chunk == 0 {
        return invalid("chunk size must be positive");
    }
    let chunk = chunk as u64;
    let n_chunks = n.div_ceil(chunk);
    let root = Rng::new(seed);
    let d = dist.dim();
    Ok((0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = root.split(c);
            let len = chunk.min(n - c * chunk);
            let mut x = vec![0.0; d];
            let mut z = vec![0.0; d];
            let mut stats = RunningStats::new();
            for _ in 0..len {
                dist.sample_into(&mut rng, &mut x, &mut z);
                stats.push(payoff(&x));
            }
            stats
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_payoff() {
        let g = GaussianSpec::standard(3).unwrap();
        let e = estimate(|_| 1.0, &g, 1000, 5).unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.payoff_std, 0.0);
        assert_eq!(e.std_error, 0.0);
        assert_eq!(e.n_samples, 1000);
    }

    #[test]
    fn rejects_single_sample() {
        let g = GaussianSpec::standard(1).unwrap();
        assert!(estimate(|_| 1.0, &g, 1, 0).is_err());
    }

    #[test]
    fn deterministic_in_seed() {
        let g = GaussianSpec::standard(2).unwrap();
        let f = |x: &[f64]| x[0] * x[1] + x[0];
        let a = estimate(f, &g, 200_000, 9).unwrap();
        let b = estimate(f, &g, 200_000, 9).unwrap();
        assert_eq!(a, b);
        let c = estimate(f, &g, 200_000, 10).unwrap();
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn welford_matches_two_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| 1e8 + (i as f64 * 0.37).sin()).collect();
        let mut s = RunningStats::new();
        xs.iter().for_each(|&x| s.push(x));
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((s.mean() - mean).abs() < 1e-7);
        assert!((s.variance() - var).abs() < 1e-9 * var.max(1.0));
    }

    #[test]
    fn merge_matches_sequential() {
        let xs: Vec<f64> = (0..777).map(|i| ((i * i) % 13) as f64 * 0.1).collect();
        let mut all = RunningStats::new();
        xs.iter().for_each(|&x| all.push(x));
        let (mut a, mut b) = (RunningStats::new(), RunningStats::new());
        xs[..300].iter().for_each(|&x| a.push(x));
        xs[300..].iter().for_each(|&x| b.push(x));
        let m = a.merge(&b);
        assert_eq!(m.count(), all.count());
        assert!((m.mean() - all.mean()).abs() < 1e-14);
        assert!((m.variance() - all.variance()).abs() < 1e-13);
    }

    #[test]
    fn standard_normal_moments() {
        let g = GaussianSpec::standard(1).unwrap();
        let e = estimate(|x| x[0] * x[0], &g, 400_000, 3).unwrap();
        assert!((e.mean - 1.0).abs() < 4.0 * e.std_error, "{e:?}");
    }
}
