//! Multivariate Gaussian weight: density, conditioning on pinned
//! coordinates, sampling, and truncated lognormal moments.

use crate::error::{invalid, Error, Result};
use crate::numcore::{cholesky, normal_cdf, Matrix, Rng, LN_SQRT_2PI};

/// Gaussian `N(μ, Σ)` times the discount factor `exp(−rate·horizon)`.
#[derive(Clone, Debug)]
pub struct GaussianSpec {
    mu: Vec<f64>,
    sigma: Matrix,
    rate: f64,
    horizon: f64,
    chol: Matrix,
    log_det: f64,
}

impl GaussianSpec {
    pub fn new(mu: Vec<f64>, sigma: Matrix, rate: f64, horizon: f64) -> Result<Self> {
        if mu.is_empty() || sigma.rows() != mu.len() || sigma.cols() != mu.len() {
            return invalid(format!(
                "mean of length {} does not match covariance {}x{}",
                mu.len(),
                sigma.rows(),
                sigma.cols()
            ));
        }
        if !mu.iter().all(|v| v.is_finite()) || !rate.is_finite() || !horizon.is_finite() {
            return invalid("Gaussian parameters must be finite");
        }
        let chol = cholesky(&sigma)?;
        let log_det = 2.0 * (0..mu.len()).map(|i| chol[(i, i)].ln()).sum::<f64>();
        Ok(Self {
            mu,
            sigma,
            rate,
            horizon,
            chol,
            log_det,
        })
    }

    /// Standard normal in `dim` dimensions, no discounting.
    pub fn standard(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim], Matrix::identity(dim), 0.0, 1.0)
    }

    /// Mean `mu` in every coordinate and covariance `ρ + (1−ρ)δᵢⱼ`.
    pub fn equicorrelated(dim: usize, mu: f64, rho: f64) -> Result<Self> {
        let sigma = Matrix::from_fn(dim, dim, |i, j| if i == j { 1.0 } else { rho });
        Self::new(vec![mu; dim], sigma, 0.0, 1.0)
    }

    pub fn with_discount(mut self, rate: f64, horizon: f64) -> Result<Self> {
        if !rate.is_finite() || !horizon.is_finite() {
            return invalid("rate and horizon must be finite");
        }
        self.rate = rate;
        self.horizon = horizon;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &Matrix {
        &self.sigma
    }

    pub fn chol(&self) -> &Matrix {
        &self.chol
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn log_discount(&self) -> f64 {
        -self.rate * self.horizon
    }

    pub fn is_diagonal(&self) -> bool {
        let d = self.dim();
        (0..d).all(|i| (0..d).all(|j| i == j || self.sigma[(i, j)] == 0.0))
    }

    /// Log of the discounted density.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        let d = self.dim();
        if x.len() != d {
            return invalid(format!("point has length {}, expected {d}", x.len()));
        }
        // Solve L z = x − μ by forward substitution.
        let mut z = vec![0.0; d];
        for i in 0..d {
            let mut s = x[i] - self.mu[i];
            for k in 0..i {
                s -= self.chol[(i, k)] * z[k];
            }
            z[i] = s / self.chol[(i, i)];
        }
        let q: f64 = z.iter().map(|v| v * v).sum();
        Ok(-0.5 * q - 0.5 * self.log_det - d as f64 * LN_SQRT_2PI + self.log_discount())
    }

    pub fn density(&self, x: &[f64]) -> Result<f64> {
        Ok(self.log_density(x)?.exp())
    }

    /// One draw `μ + L z`.
    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.sample_into(rng, &mut out, &mut vec![0.0; self.dim()]);
        out
    }

    /// Allocation-free draw into `out`, using `z` as scratch.
    pub fn sample_into(&self, rng: &mut Rng, out: &mut [f64], z: &mut [f64]) {
        let d = self.dim();
        for v in z.iter_mut() {
            *v = rng.normal();
        }
        for i in 0..d {
            let row = self.chol.row(i);
            let mut s = self.mu[i];
            for k in 0..=i {
                s += row[k] * z[k];
            }
            out[i] = s;
        }
    }

    /// Conditioner for coordinate `free` given all other coordinates.
    pub fn conditioner(&self, free: usize) -> Result<Conditioner> {
        Conditioner::new(self, free)
    }

    /// Conditional law of coordinate `free` given `pinned`, a full-length
    /// point whose entry at `free` is ignored.
    pub fn condition(&self, pinned: &[f64], free: usize) -> Result<Conditional1D> {
        if pinned.len() != self.dim() {
            return invalid(format!(
                "pinned point has length {}, expected {}",
                pinned.len(),
                self.dim()
            ));
        }
        Ok(self.conditioner(free)?.condition(pinned))
    }
}

/// Law of one coordinate given the others: the joint density at a point
/// equals `exp(log_weight)·N(x_free; mean, variance)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Conditional1D {
    pub log_weight: f64,
    pub mean: f64,
    pub variance: f64,
}

impl Conditional1D {
    pub fn density(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.variance.sqrt();
        (self.log_weight - 0.5 * z * z - LN_SQRT_2PI - 0.5 * self.variance.ln()).exp()
    }
}

/// Precomputed factorization of the pinned block for one free coordinate.
///
/// Construction is O(d³); each [`Conditioner::condition`] call is O(d²).
#[derive(Clone, Debug)]
pub struct Conditioner {
    free: usize,
    /// Indices of the pinned coordinates, in order.
    others: Vec<usize>,
    mu_free: f64,
    mu_others: Vec<f64>,
    /// Cholesky factor of the pinned-block covariance.
    chol: Option<Matrix>,
    /// Regression coefficients `Σ_fo Σ_oo⁻¹`.
    coef: Vec<f64>,
    variance: f64,
    /// `−½ log det Σ_oo − (d−1) log √(2π) − r·horizon`.
    log_norm: f64,
}

impl Conditioner {
    pub fn new(spec: &GaussianSpec, free: usize) -> Result<Self> {
        let d = spec.dim();
        if free >= d {
            return invalid(format!("free dimension {free} out of range for d={d}"));
        }
        let others: Vec<usize> = (0..d).filter(|&i| i != free).collect();
        let mu_others: Vec<f64> = others.iter().map(|&i| spec.mu[i]).collect();
        let sff = spec.sigma[(free, free)];
        if others.is_empty() {
            return Ok(Self {
                free,
                others,
                mu_free: spec.mu[free],
                mu_others,
                chol: None,
                coef: Vec::new(),
                variance: sff,
                log_norm: spec.log_discount(),
            });
        }
        let soo = Matrix::from_fn(others.len(), others.len(), |i, j| {
            spec.sigma[(others[i], others[j])]
        });
        let l = cholesky(&soo).map_err(|e| match e {
            Error::NotPositiveDefinite { .. } => {
                Error::Numerical(format!("pinned-block covariance for dimension {free} is singular"))
            }
            other => other,
        })?;
        let sfo: Vec<f64> = others.iter().map(|&j| spec.sigma[(free, j)]).collect();
        let y = forward(&l, &sfo);
        let coef = backward_t(&l, &y);
        let variance = sff - y.iter().map(|v| v * v).sum::<f64>();
        if !(variance > 0.0) {
            return Err(Error::Numerical(format!(
                "conditional variance of dimension {free} is not positive"
            )));
        }
        let log_det: f64 = 2.0 * (0..others.len()).map(|i| l[(i, i)].ln()).sum::<f64>();
        let log_norm = -0.5 * log_det - others.len() as f64 * LN_SQRT_2PI + spec.log_discount();
        Ok(Self {
            free,
            others,
            mu_free: spec.mu[free],
            mu_others,
            chol: Some(l),
            coef,
            variance,
            log_norm,
        })
    }

    pub fn free(&self) -> usize {
        self.free
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// `point` is a full-length vector; its entry at the free index is ignored.
    pub fn condition(&self, point: &[f64]) -> Conditional1D {
        let Some(l) = &self.chol else {
            return Conditional1D {
                log_weight: self.log_norm,
                mean: self.mu_free,
                variance: self.variance,
            };
        };
        let k = self.others.len();
        let mut mean = self.mu_free;
        let mut quad = 0.0;
        // Forward substitution for L z = x_o − μ_o, fused with the mean update.
        let mut z = [0.0f64; 32];
        let mut heap;
        let z: &mut [f64] = if k <= z.len() {
            &mut z[..k]
        } else {
            heap = vec![0.0; k];
            &mut heap
        };
        for i in 0..k {
            let diff = point[self.others[i]] - self.mu_others[i];
            mean += self.coef[i] * diff;
            let row = l.row(i);
            let mut s = diff;
            for j in 0..i {
                s -= row[j] * z[j];
            }
            z[i] = s / row[i];
            quad += z[i] * z[i];
        }
        Conditional1D {
            log_weight: self.log_norm - 0.5 * quad,
            mean,
            variance: self.variance,
        }
    }
}

fn forward(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    y
}

fn backward_t(l: &Matrix, y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// `∫_{−∞}^{upper} N(x; mean, variance)·eˣ dx`.
pub fn truncated_lognormal_mean(mean: f64, variance: f64, upper: f64) -> f64 {
    let full = (mean + 0.5 * variance).exp();
    if upper == f64::INFINITY {
        return full;
    }
    if upper == f64::NEG_INFINITY {
        return 0.0;
    }
    full * normal_cdf((upper - mean - variance) / variance.sqrt())
}
